"""Run the service: python -m embed_service (configure via ES_* env vars)."""

import os

import uvicorn

from .app import create_app


def main():
    port = int(os.environ.get("ES_PORT", "8601"))
    uvicorn.run(create_app(), host="127.0.0.1", port=port, log_level="warning")


if __name__ == "__main__":
    main()
