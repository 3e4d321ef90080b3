import json
import struct

import numpy as np

MAGIC = b"PCFSNAP1"


def read_snapshot(path):
    """Read a snapshot container; channels come back as (n, n, n, n) arrays, complex where flagged."""
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ValueError(f"{path}: not a snapshot container")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen))
        data = np.frombuffer(fh.read(), dtype="<f8")
    n = header["grid"]["n"]
    shape = (n, n, n, n)
    channels = {}
    for ch in header["channels"]:
        raw = data[ch["offset"] : ch["offset"] + ch["count"]]
        if ch["complex"]:
            channels[ch["name"]] = (raw[0::2] + 1j * raw[1::2]).reshape(shape)
        else:
            channels[ch["name"]] = raw.reshape(shape)
    return {
        "kind": header["kind"],
        "t": header["t"],
        "periods": header["grid"]["periods"],
        "channels": channels,
    }
