#!/usr/bin/env python3
"""Launch the HTTP service.

Environment overrides: RAGTRACE_INDEX_PATH, RAGTRACE_STORE_PATH,
RAGTRACE_ORACLE_CONCURRENCY, RAGTRACE_JOB_WORKERS, and friends; pass a JSON
config file with --config. The demo oracles and corpora under fixtures/ can
be loaded afterwards via POST /corpus and POST /oracles.
"""

import argparse

import uvicorn

from ragtrace.service import ServiceConfig, create_app


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    args = parser.parse_args()
    app = create_app(ServiceConfig.load(config_file=args.config))
    uvicorn.run(app, host=args.host, port=args.port)


if __name__ == "__main__":
    main()
