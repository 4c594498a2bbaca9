from core.exceptions import DimensionError, NumericalError, StabilizationError


class TestStabilizationError:
    def test_details_default_to_empty(self):
        error = NumericalError("norm drifted")
        assert error.details == {}
        assert error.describe() == "NumericalError: norm drifted"

    def test_describe_lists_details(self):
        error = DimensionError("bad shape", details={"n_q": 3, "shape": (4, 4)})
        assert error.describe() == "DimensionError: bad shape [n_q=3, shape=(4, 4)]"
        assert isinstance(error, StabilizationError)
        assert str(error) == "bad shape"
