"""Run a real bridge server in a daemon thread on an OS-chosen port."""

import threading
import time

import uvicorn

from sdbridge.server import SessionHolder, build_app


class ServerHandle:
    def __init__(self, url, session, server, thread):
        self.url = url
        self.session = session
        self._server = server
        self._thread = thread


def start_server(session) -> ServerHandle:
    """Serve `session` (may be None to model a still-loading backbone)."""
    holder = SessionHolder()
    holder.session = session
    config = uvicorn.Config(build_app(holder), host="127.0.0.1", port=0,
                            log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 15.0
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("bridge server did not start in time")
        if not thread.is_alive():
            raise RuntimeError("bridge server thread died during startup")
        time.sleep(0.02)
    port = server.servers[0].sockets[0].getsockname()[1]
    return ServerHandle(f"http://127.0.0.1:{port}", session, server, thread)


def stop_server(handle: ServerHandle) -> None:
    handle._server.should_exit = True
    handle._thread.join(timeout=10)
