"""
Application entry point
"""
import sys

from app.routes.cli import main

if __name__ == '__main__':
    sys.exit(main())
