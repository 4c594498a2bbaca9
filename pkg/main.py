"""
Main entry point for the quantum register stabilization simulator.

This module loads configuration and hands the command line to app.cli.
"""
import sys

from core.config import get_settings
from core.exceptions import ConfigurationError
from core.logger import setup_logger

logger = setup_logger(__name__)


def main():
    """Main application entry point."""
    try:
        settings = get_settings()
        logger.debug(f"{settings.app_name}: log level {settings.log_level}, output dir {settings.output_dir}")

        from app.cli import main as cli_main

        sys.exit(cli_main())

    except ConfigurationError as e:
        logger.error(e.describe())
        sys.exit(1)

    except Exception as e:
        logger.error(f"Failed to run: {e}", exc_info=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
