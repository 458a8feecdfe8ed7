"""Run the sidecar: ``python -m tvn_sidecar [--model ...] [--port ...]``."""

from __future__ import annotations

import argparse

import uvicorn

from .app import SidecarConfig, create_app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tvn-sidecar")
    parser.add_argument("--model", help="st:<checkpoint> or hash:<dim>:<seed> "
                        "(default $SIDECAR_MODEL or hash:384:0)")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=None,
                        help="default $SIDECAR_PORT or 8008")
    parser.add_argument("--batch-cap", type=int, default=None)
    args = parser.parse_args(argv)
    config = SidecarConfig.from_env(
        model=args.model, port=args.port, batch_cap=args.batch_cap
    )
    uvicorn.run(create_app(config), host=args.host, port=config.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
