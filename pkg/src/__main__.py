"""Main entry point for the application when run as a module.

This allows running abnn-lab with:
    python -m src
"""

from src.cli import app


def main():
    """Run the abnn-lab CLI."""
    app(prog_name="abnn-lab")


if __name__ == "__main__":
    main()
