"""Wire protocol: canonical JSON messages in length-prefixed frames.

A frame is a 4-byte big-endian length followed by that many bytes of UTF-8
JSON with sorted keys.  Every message carries exactly {version, stage,
session, body}; body values are hex strings, decimal strings, or flat lists
thereof.  Unknown fields anywhere are rejected, so the codecs double as the
protocol's input validators.

Replies reuse the request's stage and session.  A rejected reply has body
{"result": "rejected", "reason": ...}; everything else is an ok reply whose
remaining fields are stage-specific.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .commitments import Commitment
from .groups import GroupParams
from .proofs import MODE_HIDDEN, MODE_KNOWN, CmProof, LinkProof, MbsBranch, MbsProof, NNProof
from .protocol import CredentialPublic, PublicBundle, validate_space_id
from .server import DataEntry
from .signatures import PublicKey

VERSION = 1

STAGES = (
    "setup",
    "register",
    "submit",
    "claim-open",
    "claim-reveal",
    "claim-refresh",
    "inquire-open",
    "inquire-reveal",
    "inquire-refresh",
)

MAX_FRAME = 1 << 20
_MAX_LIST = 16384
_MAX_SIG_HEX = 4096


class WireError(Exception):
    """Malformed frame or message; the connection is not recoverable."""


@dataclass(frozen=True)
class WireMessage:
    version: int
    stage: str
    session: str
    body: dict


# -- framing -----------------------------------------------------------------


def encode_message(msg: WireMessage) -> bytes:
    payload = {
        "version": msg.version,
        "stage": msg.stage,
        "session": msg.session,
        "body": msg.body,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def decode_message(data: bytes) -> WireMessage:
    try:
        payload = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WireError("frame is not valid JSON") from exc
    if not isinstance(payload, dict) or set(payload) != {"version", "stage", "session", "body"}:
        raise WireError("message must have exactly version/stage/session/body")
    version, stage, session, body = (
        payload["version"],
        payload["stage"],
        payload["session"],
        payload["body"],
    )
    if version != VERSION:
        raise WireError("unsupported protocol version")
    if stage not in STAGES:
        raise WireError("unknown stage tag")
    if not isinstance(session, str) or len(session) > 64:
        raise WireError("bad session field")
    if not isinstance(body, dict):
        raise WireError("body must be a map")
    for key, value in body.items():
        if not isinstance(key, str):
            raise WireError("body keys must be strings")
        if isinstance(value, str):
            continue
        if isinstance(value, list):
            if len(value) > _MAX_LIST or not all(isinstance(v, str) for v in value):
                raise WireError("body lists must be flat lists of strings")
            continue
        raise WireError("body values must be strings or lists of strings")
    return WireMessage(version, stage, session, body)


def send_frame(sock, payload: bytes, cap: int = MAX_FRAME) -> int:
    """Writes one frame; returns the total bytes put on the wire."""
    if len(payload) > cap:
        raise WireError("frame exceeds the size cap")
    frame = len(payload).to_bytes(4, "big") + payload
    sock.sendall(frame)
    return len(frame)


def recv_frame(sock, cap: int = MAX_FRAME) -> bytes | None:
    """Reads one frame; None on clean EOF at a frame boundary."""
    header = _recv_exact(sock, 4)
    if header is None:
        return None
    size = int.from_bytes(header, "big")
    if size > cap:
        raise WireError("frame exceeds the size cap")
    payload = _recv_exact(sock, size)
    if payload is None:
        raise WireError("truncated frame")
    return payload


def _recv_exact(sock, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None if not buf else _truncated()
        buf += chunk
    return buf


def _truncated():
    raise WireError("connection closed mid-frame")


# -- field codecs --------------------------------------------------------------


def _enc_el(params: GroupParams, c: Commitment) -> str:
    return params.encode_element(c.element).hex()


def _dec_el(params: GroupParams, text) -> Commitment:
    return Commitment(params.decode_element(_hex_bytes(text, params.element_bytes)))


def _enc_sc(params: GroupParams, x: int) -> str:
    return params.encode_scalar(x).hex()


def _dec_sc(params: GroupParams, text) -> int:
    return params.decode_scalar(_hex_bytes(text, params.scalar_bytes))


def _hex_bytes(text, width: int) -> bytes:
    if not isinstance(text, str) or len(text) != 2 * width:
        raise WireError("bad hex field width")
    try:
        return bytes.fromhex(text)
    except ValueError as exc:
        raise WireError("bad hex field") from exc


def _dec_int(text, lo: int = 0, hi: int = (1 << 64) - 1) -> int:
    if not isinstance(text, str) or not text.isascii() or not text.isdigit() or len(text) > 20:
        raise WireError("bad decimal field")
    value = int(text)
    if not lo <= value <= hi:
        raise WireError("decimal field out of range")
    return value


def _dec_bigint(text, max_hex: int = 4096) -> int:
    if not isinstance(text, str) or not 1 <= len(text) <= max_hex:
        raise WireError("bad big integer field")
    try:
        return int(text, 16)
    except ValueError as exc:
        raise WireError("bad big integer field") from exc


def _dec_float(text) -> float:
    if not isinstance(text, str) or len(text) > 32:
        raise WireError("bad float field")
    try:
        value = float(text)
    except ValueError as exc:
        raise WireError("bad float field") from exc
    if not math.isfinite(value) or value <= 0:
        raise WireError("float field must be finite and positive")
    return value


def _dec_hexblob(text, max_hex: int = _MAX_SIG_HEX) -> bytes:
    if not isinstance(text, str) or len(text) > max_hex or len(text) % 2:
        raise WireError("bad hex blob")
    try:
        return bytes.fromhex(text)
    except ValueError as exc:
        raise WireError("bad hex blob") from exc


def _need(body: dict, *fields: str) -> list:
    if set(body) != set(fields):
        raise WireError("body fields must be exactly %s" % (sorted(fields),))
    return [body[f] for f in fields]


def _wrap(exc_types=(WireError, ValueError, KeyError, TypeError, OverflowError)):
    """Decode helpers raise WireError for anything malformed."""

    def deco(fn):
        def inner(*args, **kw):
            try:
                return fn(*args, **kw)
            except WireError:
                raise
            except exc_types as exc:
                raise WireError(str(exc)) from exc

        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner

    return deco


# -- credential block ------------------------------------------------------------


def _enc_cred(params: GroupParams, cred: CredentialPublic) -> dict:
    return {
        "cm_s": _enc_el(params, cred.cm_s),
        "cm_q": _enc_el(params, cred.cm_q),
        "cm_b": _enc_el(params, cred.cm_b),
        "sig": cred.sig.hex(),
    }


def _dec_cred(params: GroupParams, body: dict) -> CredentialPublic:
    return CredentialPublic(
        cm_s=_dec_el(params, body["cm_s"]),
        cm_q=_dec_el(params, body["cm_q"]),
        cm_b=_dec_el(params, body["cm_b"]),
        sig=_dec_hexblob(body["sig"]),
    )


_CRED_FIELDS = ("cm_s", "cm_q", "cm_b", "sig")


# -- stage codecs ------------------------------------------------------------------
# Each stage has encode/decode for its request and its ok-reply.  Rejected
# replies are uniform across stages.


def encode_setup_request(session: str) -> WireMessage:
    return WireMessage(VERSION, "setup", session, {})


@_wrap()
def decode_setup_request(msg: WireMessage) -> None:
    _need(msg.body)
    return None


def encode_setup_reply(session: str, bundle: PublicBundle) -> WireMessage:
    params = bundle.params
    body = {
        "result": "ok",
        "q": "%x" % params.q,
        "g": "%x" % params.g,
        "h": "%x" % params.h,
        "bits": str(params.bits),
        "key_n": "%x" % bundle.server_key.n,
        "key_e": "%x" % bundle.server_key.e,
        "hash": bundle.hash_name,
        "b0": str(bundle.b0),
        "c_q": str(bundle.c_q),
        "nn_bits": str(bundle.nn_bits),
        "epsilon": str(bundle.epsilon),
        "slot_length": repr(bundle.slot_length),
    }
    return WireMessage(VERSION, "setup", session, body)


@_wrap()
def decode_setup_reply(msg: WireMessage) -> PublicBundle:
    (
        _result,
        q_hex,
        g_hex,
        h_hex,
        bits,
        key_n,
        key_e,
        hash_name,
        b0,
        c_q,
        nn_bits,
        epsilon,
        slot_length,
    ) = _need(
        msg.body,
        "result",
        "q",
        "g",
        "h",
        "bits",
        "key_n",
        "key_e",
        "hash",
        "b0",
        "c_q",
        "nn_bits",
        "epsilon",
        "slot_length",
    )
    q = _dec_bigint(q_hex)
    params = GroupParams(
        q=q, p=(q - 1) // 2, g=_dec_bigint(g_hex), h=_dec_bigint(h_hex), bits=_dec_int(bits, 1, 1 << 16)
    )
    params.validate()
    if not isinstance(hash_name, str) or len(hash_name) > 32:
        raise WireError("bad setup reply")
    bundle = PublicBundle(
        params=params,
        server_key=PublicKey(n=_dec_bigint(key_n), e=_dec_bigint(key_e)),
        hash_name=hash_name,
        b0=_dec_int(b0),
        c_q=_dec_int(c_q),
        nn_bits=_dec_int(nn_bits, 1, 1 << 16),
        epsilon=_dec_int(epsilon),
        slot_length=_dec_float(slot_length),
    )
    bundle.validate()
    return bundle


def encode_register_request(params: GroupParams, session: str, cm_s1, cm_q) -> WireMessage:
    body = {"cm_s1": _enc_el(params, cm_s1), "cm_q": _enc_el(params, cm_q)}
    return WireMessage(VERSION, "register", session, body)


@_wrap()
def decode_register_request(params: GroupParams, msg: WireMessage):
    cm_s1, cm_q = _need(msg.body, "cm_s1", "cm_q")
    return _dec_el(params, cm_s1), _dec_el(params, cm_q)


def encode_register_reply(params: GroupParams, session: str, s2: int, sig: bytes) -> WireMessage:
    body = {"result": "ok", "s2": _enc_sc(params, s2), "sig": sig.hex()}
    return WireMessage(VERSION, "register", session, body)


@_wrap()
def decode_register_reply(params: GroupParams, msg: WireMessage) -> tuple[int, bytes]:
    _result, s2, sig = _need(msg.body, "result", "s2", "sig")
    return _dec_sc(params, s2), _dec_hexblob(sig)


def encode_submit_request(
    params: GroupParams, session: str, entry: DataEntry, proof: CmProof
) -> WireMessage:
    body = {
        "j": entry.j,
        "t": str(entry.t),
        "a": str(entry.a),
        "ticket": _enc_el(params, entry.ticket),
        "proof_a": _enc_el(params, proof.a),
        "proof_zx": _enc_sc(params, proof.z_x),
    }
    return WireMessage(VERSION, "submit", session, body)


@_wrap()
def decode_submit_request(params: GroupParams, msg: WireMessage) -> tuple[DataEntry, CmProof]:
    j, t, a, ticket, proof_a, proof_zx = _need(
        msg.body, "j", "t", "a", "ticket", "proof_a", "proof_zx"
    )
    validate_space_id(j)
    entry = DataEntry(j, _dec_int(t), _dec_el(params, ticket), _dec_int(a, 0, 1))
    proof = CmProof(_dec_el(params, proof_a), _dec_sc(params, proof_zx), None, MODE_KNOWN)
    return entry, proof


def encode_submit_reply(session: str, status: str) -> WireMessage:
    return WireMessage(VERSION, "submit", session, {"result": "ok", "status": status})


@_wrap()
def decode_submit_reply(msg: WireMessage) -> str:
    _result, status = _need(msg.body, "result", "status")
    if status not in ("available", "occupied", "unconfirmed"):
        raise WireError("unknown status")
    return status


def encode_claim_open_request(
    params: GroupParams, session: str, j: str, t: int, ticket, cred, proof: LinkProof
) -> WireMessage:
    body = {
        "j": j,
        "t": str(t),
        "ticket": _enc_el(params, ticket),
        "link_a_cred": _enc_el(params, proof.a_cred),
        "link_a_ticket": _enc_el(params, proof.a_ticket),
        "link_zx": _enc_sc(params, proof.z_x),
        "link_zr": _enc_sc(params, proof.z_r),
    }
    body.update(_enc_cred(params, cred))
    return WireMessage(VERSION, "claim-open", session, body)


@_wrap()
def decode_claim_open_request(params: GroupParams, msg: WireMessage):
    fields = ("j", "t", "ticket", "link_a_cred", "link_a_ticket", "link_zx", "link_zr") + _CRED_FIELDS
    j, t, ticket, a_cred, a_ticket, zx, zr = _need(msg.body, *fields)[:7]
    validate_space_id(j)
    cred = _dec_cred(params, msg.body)
    proof = LinkProof(
        _dec_el(params, a_cred), _dec_el(params, a_ticket), _dec_sc(params, zx), _dec_sc(params, zr)
    )
    return j, _dec_int(t), _dec_el(params, ticket), cred, proof


def encode_claim_open_reply(session: str, credit: int) -> WireMessage:
    return WireMessage(VERSION, "claim-open", session, {"result": "ok", "credit": str(credit)})


@_wrap()
def decode_claim_open_reply(msg: WireMessage) -> int:
    _result, credit = _need(msg.body, "result", "credit")
    return _dec_int(credit)


def encode_reveal_request(
    params: GroupParams, stage: str, session: str, q: int, r_q: int
) -> WireMessage:
    body = {"q": _enc_sc(params, q), "r_q": _enc_sc(params, r_q)}
    return WireMessage(VERSION, stage, session, body)


@_wrap()
def decode_reveal_request(params: GroupParams, msg: WireMessage) -> tuple[int, int]:
    q, r_q = _need(msg.body, "q", "r_q")
    return _dec_sc(params, q), _dec_sc(params, r_q)


def encode_reveal_reply(stage: str, session: str) -> WireMessage:
    return WireMessage(VERSION, stage, session, {"result": "ok"})


@_wrap()
def decode_reveal_reply(msg: WireMessage) -> None:
    _need(msg.body, "result")
    return None


def encode_refresh_request(params: GroupParams, stage: str, session: str, cm_q_new) -> WireMessage:
    return WireMessage(VERSION, stage, session, {"cm_q_new": _enc_el(params, cm_q_new)})


@_wrap()
def decode_refresh_request(params: GroupParams, msg: WireMessage) -> Commitment:
    (cm_q_new,) = _need(msg.body, "cm_q_new")
    return _dec_el(params, cm_q_new)


def encode_refresh_reply(stage: str, session: str, sig: bytes) -> WireMessage:
    return WireMessage(VERSION, stage, session, {"result": "ok", "sig": sig.hex()})


@_wrap()
def decode_refresh_reply(msg: WireMessage) -> bytes:
    _result, sig = _need(msg.body, "result", "sig")
    return _dec_hexblob(sig)


def encode_inquire_open_request(
    params: GroupParams,
    session: str,
    cred,
    cm_proof: CmProof,
    nn_proof: NNProof,
    spaces: list[str],
) -> WireMessage:
    body = {
        "spaces": list(spaces),
        "cmp_a": _enc_el(params, cm_proof.a),
        "cmp_zx": _enc_sc(params, cm_proof.z_x),
        "cmp_zr": _enc_sc(params, cm_proof.z_r),
        "nn_a0": _enc_el(params, nn_proof.a0),
        "nn_zr": _enc_sc(params, nn_proof.z_r),
        "nn_bit_cms": [_enc_el(params, c) for c in nn_proof.bit_commitments],
        "nn_bit_a": [],
        "nn_bit_zx": [],
        "nn_bit_beta": [],
        "nn_bit_zr": [],
    }
    for bp in nn_proof.bit_proofs:
        for br in bp.branches:
            body["nn_bit_a"].append(_enc_el(params, br.a))
            body["nn_bit_zx"].append(_enc_sc(params, br.z_x))
            body["nn_bit_beta"].append(_enc_sc(params, br.beta))
            body["nn_bit_zr"].append(_enc_sc(params, br.z_r))
    body.update(_enc_cred(params, cred))
    return WireMessage(VERSION, "inquire-open", session, body)


@_wrap()
def decode_inquire_open_request(params: GroupParams, msg: WireMessage):
    fields = (
        "spaces",
        "cmp_a",
        "cmp_zx",
        "cmp_zr",
        "nn_a0",
        "nn_zr",
        "nn_bit_cms",
        "nn_bit_a",
        "nn_bit_zx",
        "nn_bit_beta",
        "nn_bit_zr",
    ) + _CRED_FIELDS
    values = _need(msg.body, *fields)
    spaces, cmp_a, cmp_zx, cmp_zr, nn_a0, nn_zr = values[:6]
    bit_cms, bit_a, bit_zx, bit_beta, bit_zr = values[6:11]
    if not isinstance(spaces, list) or not 1 <= len(spaces) <= 256:
        raise WireError("bad spaces list")
    for j in spaces:
        validate_space_id(j)
    cred = _dec_cred(params, msg.body)
    cm_proof = CmProof(
        _dec_el(params, cmp_a), _dec_sc(params, cmp_zx), _dec_sc(params, cmp_zr), MODE_HIDDEN
    )
    lists = (bit_cms, bit_a, bit_zx, bit_beta, bit_zr)
    if not all(isinstance(v, list) for v in lists):
        raise WireError("bit proof fields must be lists")
    m = len(bit_cms)
    if not 1 <= m <= 512 or any(len(v) != 2 * m for v in lists[1:]):
        raise WireError("inconsistent bit proof arity")
    bit_proofs = []
    for i in range(m):
        branches = tuple(
            MbsBranch(
                a=_dec_el(params, bit_a[2 * i + k]),
                z_x=_dec_sc(params, bit_zx[2 * i + k]),
                beta=_dec_sc(params, bit_beta[2 * i + k]),
                z_r=_dec_sc(params, bit_zr[2 * i + k]),
            )
            for k in range(2)
        )
        bit_proofs.append(MbsProof(branches))
    nn_proof = NNProof(
        m=m,
        bit_commitments=tuple(_dec_el(params, c) for c in bit_cms),
        bit_proofs=tuple(bit_proofs),
        a0=_dec_el(params, nn_a0),
        z_r=_dec_sc(params, nn_zr),
    )
    return cred, cm_proof, nn_proof, list(spaces)


def encode_inquire_open_reply(session: str, statuses: list[str]) -> WireMessage:
    return WireMessage(
        VERSION, "inquire-open", session, {"result": "ok", "statuses": list(statuses)}
    )


@_wrap()
def decode_inquire_open_reply(msg: WireMessage) -> list[str]:
    _result, statuses = _need(msg.body, "result", "statuses")
    if not isinstance(statuses, list):
        raise WireError("statuses must be a list")
    for status in statuses:
        if status not in ("available", "occupied", "unconfirmed"):
            raise WireError("unknown status")
    return list(statuses)


# -- rejected replies ---------------------------------------------------------------


def encode_rejected_reply(stage: str, session: str, reason: str) -> WireMessage:
    return WireMessage(VERSION, stage, session, {"result": "rejected", "reason": reason})


def reply_rejection(msg: WireMessage) -> str | None:
    """The rejection reason if this reply is a rejection, else None."""
    if msg.body.get("result") == "rejected":
        reason = msg.body.get("reason")
        if set(msg.body) != {"result", "reason"} or not isinstance(reason, str) or len(reason) > 64:
            raise WireError("malformed rejection reply")
        return reason
    if msg.body.get("result") != "ok":
        raise WireError("reply carries no result")
    return None
