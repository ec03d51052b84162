"""Subprocess client for the episode server's JSON-lines protocol."""

from __future__ import annotations

import json
import subprocess


class EnvError(RuntimeError):
    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


class EnvClient:
    """Drives one `peg env-serve` process over stdin/stdout."""

    def __init__(self, graphs_dir: str, m: int = 2, capture: str = "adjacent",
                 evader: str = "dp-async-evader", obs_range: int = 1,
                 max_steps: int = 32, guidance: bool = True,
                 privileged: bool = True, peg_cmd: str = "peg"):
        cmd = [peg_cmd, "env-serve", "--graphs", graphs_dir,
               "--m", str(m), "--capture", capture,
               "--evader", evader, "--range", str(obs_range),
               "--max-steps", str(max_steps)]
        if guidance:
            cmd.append("--guidance")
        if privileged:
            cmd.append("--privileged")
        self.proc = subprocess.Popen(cmd, stdin=subprocess.PIPE,
                                     stdout=subprocess.PIPE, text=True,
                                     bufsize=1)

    def _rpc(self, payload: dict) -> dict:
        self.proc.stdin.write(json.dumps(payload) + "\n")
        self.proc.stdin.flush()
        line = self.proc.stdout.readline()
        if not line:
            raise EnvError("ServerExit", "episode server closed the pipe")
        resp = json.loads(line)
        if "error" in resp:
            raise EnvError(resp["error"], resp.get("message", ""))
        return resp

    def graphs(self) -> list[dict]:
        return self._rpc({"cmd": "graphs"})["graphs"]

    def reset(self, graph_id: str | None = None, seed: int = 0,
              options: dict | None = None) -> dict:
        req: dict = {"cmd": "reset", "seed": seed}
        if graph_id is not None:
            req["graph_id"] = graph_id
        if options:
            req["options"] = options
        return self._rpc(req)

    def step(self, actions: list[int]) -> dict:
        return self._rpc({"cmd": "step", "actions": [int(a) for a in actions]})

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self._rpc({"cmd": "close"})
            except EnvError:
                pass
            self.proc.stdin.close()
            self.proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
