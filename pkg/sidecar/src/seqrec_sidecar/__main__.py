"""Run the sidecar: python -m seqrec_sidecar [--stub|--real] [--port N]."""

import argparse
import json

import uvicorn

from .service import Settings, create_app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="seqrec-sidecar")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    mode = parser.add_mutually_exclusive_group()
    mode.add_argument("--stub", dest="mode", action="store_const", const="stub")
    mode.add_argument("--real", dest="mode", action="store_const", const="real")
    parser.set_defaults(mode="stub")
    parser.add_argument("--dim", type=int, default=384)
    parser.add_argument("--max-batch", type=int, default=512)
    parser.add_argument("--embed-model", default="intfloat/e5-small-v2")
    parser.add_argument("--gen-model", default="meta-llama/Llama-3.1-8B")
    parser.add_argument("--adapter-path")
    parser.add_argument("--canned-beams", help="JSON file with a list of beam texts (stub mode)")
    parser.add_argument("--no-normalize", dest="normalize", action="store_false",
                        help="serve raw encoder outputs (ablation)")
    args = parser.parse_args(argv)

    canned = None
    if args.canned_beams:
        with open(args.canned_beams, "r", encoding="utf-8") as f:
            canned = json.load(f)

    settings = Settings(
        mode=args.mode,
        dim=args.dim,
        max_batch=args.max_batch,
        embed_model=args.embed_model,
        gen_model=args.gen_model,
        adapter_path=args.adapter_path,
        canned_beams=canned,
        normalize_embeddings=args.normalize,
    )
    uvicorn.run(create_app(settings), host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
