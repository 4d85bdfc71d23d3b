"""Run the session service: python -m factscribe.service [host [port]]"""

import sys

import uvicorn

from ..config import AppConfig
from .app import create_app


def main() -> None:
    host = sys.argv[1] if len(sys.argv) > 1 else "127.0.0.1"
    port = int(sys.argv[2]) if len(sys.argv) > 2 else 8787
    uvicorn.run(create_app(AppConfig.from_env()), host=host, port=port)


if __name__ == "__main__":
    main()
