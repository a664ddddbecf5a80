import sys
from pathlib import Path

from dotenv import load_dotenv

# Load .env from the project root before anything else
load_dotenv(Path(__file__).resolve().parent / ".env")

from multitask_diffusion.cli import main

if __name__ == "__main__":
    sys.exit(main())
