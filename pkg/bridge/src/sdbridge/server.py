"""The HTTP service: FastAPI app plus a small command-line runner.

    python3 -m sdbridge.server --port 8901

serves the built-in demo setup; point --adapters at a directory of .npz
weight files to serve real ones.
"""

from __future__ import annotations

import argparse
import base64
import tempfile

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .codec import CodecError, tensor_from_b64, tensor_to_b64
from .session import BridgeError, BridgeSession

PROTOCOL_VERSION = 1


class SessionHolder:
    """Indirection so the app can exist before the model has loaded."""

    def __init__(self, session: BridgeSession | None = None):
        self.session = session

    def get(self) -> BridgeSession:
        if self.session is None:
            raise BridgeError(503, "model is still loading")
        return self.session


class RegisterRequest(BaseModel):
    name: str
    text: str
    negative: bool = False


class AdapterRef(BaseModel):
    id: str
    scale: float | None = None


class PredictRequest(BaseModel):
    condition: str
    timestep: int
    adapters: list[AdapterRef] = Field(default_factory=list)
    latent: str


class EncodeRequest(BaseModel):
    image: str


class DecodeRequest(BaseModel):
    latent: str


def build_app(holder: SessionHolder) -> FastAPI:
    app = FastAPI(title="sdbridge", docs_url=None, redoc_url=None)

    @app.exception_handler(BridgeError)
    async def _bridge_error(request: Request, exc: BridgeError):
        return JSONResponse(status_code=exc.status,
                            content={"detail": exc.message})

    @app.exception_handler(CodecError)
    async def _codec_error(request: Request, exc: CodecError):
        return JSONResponse(status_code=422,
                            content={"detail": f"bad tensor payload: {exc}"})

    @app.exception_handler(RequestValidationError)
    async def _invalid(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        where = ".".join(str(p) for p in first.get("loc", ()))
        return JSONResponse(
            status_code=422,
            content={"detail": f"invalid request: {where}: "
                               f"{first.get('msg', 'validation failed')}"})

    @app.exception_handler(Exception)
    async def _unexpected(request: Request, exc: Exception):
        return JSONResponse(status_code=500,
                            content={"detail": f"model error: {exc}"})

    @app.get("/health")
    def health():
        session = holder.get()
        return {
            "protocol_version": PROTOCOL_VERSION,
            "latent_shape": list(session.latent_shape),
            "model_spec": session.model_spec,
        }

    @app.post("/register_condition")
    def register_condition(req: RegisterRequest):
        holder.get().register_condition(req.name, req.text, req.negative)
        return {"ok": True}

    @app.post("/predict")
    def predict(req: PredictRequest):
        session = holder.get()
        latent = tensor_from_b64(req.latent)
        adapters = [{"id": ref.id, "scale": ref.scale} for ref in req.adapters]
        eps = session.predict(req.condition, req.timestep, adapters, latent)
        return {"eps": tensor_to_b64(eps)}

    @app.post("/encode")
    def encode(req: EncodeRequest):
        try:
            png = base64.b64decode(req.image.encode("ascii"), validate=True)
        except Exception as exc:
            raise BridgeError(422, f"invalid base64 image: {exc}") from exc
        latent = holder.get().encode(png)
        return {"latent": tensor_to_b64(latent)}

    @app.post("/decode")
    def decode(req: DecodeRequest):
        latent = tensor_from_b64(req.latent)
        png = holder.get().decode(latent)
        return {"image": base64.b64encode(png).decode("ascii")}

    return app


def build_demo_session(model_spec: str = "tiny-unet-v1", seed: int = 0,
                       adapter_dir=None) -> BridgeSession:
    """A ready session; without an adapter dir the demo adapters are used."""
    from .demo_assets import ensure_demo_adapters

    if adapter_dir is None:
        adapter_dir = tempfile.mkdtemp(prefix="sdbridge-adapters-")
        ensure_demo_adapters(adapter_dir)
    return BridgeSession(model_spec=model_spec, seed=seed,
                         adapter_dir=adapter_dir)


def main(argv=None) -> int:
    import uvicorn

    parser = argparse.ArgumentParser(
        prog="sdbridge", description="noise-prediction bridge server")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8901)
    parser.add_argument("--model-spec", default="tiny-unet-v1")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--adapters",
                        help="directory of .npz adapter weight files "
                             "(default: built-in demo adapters)")
    args = parser.parse_args(argv)

    holder = SessionHolder()
    app = build_app(holder)
    holder.session = build_demo_session(args.model_spec, args.seed,
                                        args.adapters)
    print(f"serving {args.model_spec} on {args.host}:{args.port} "
          f"(adapters: {', '.join(holder.session.adapter_ids) or 'none'})")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
