"""parksense: privacy-preserving crowdsensed parking availability.

A prime-order group with Pedersen commitments and Σ-protocol proofs
underpins a five-stage crowdsensing protocol: anonymous registration,
unlinkable submissions, majority-vote confirmation, credit claiming, and
paid inquiry.  The public surface re-exported here is the stable API;
module internals may move.
"""

from .blur import GrayImage, blurriness, edge_sharpness
from .client import Client, ClientError, PendingTicket
from .commitments import Commitment, Opening, combine, commit, commit_random, shift, verify_opening
from .groups import GroupParams, gen_params, pinned_2048
from .netio import ProtocolServer, RemoteServer, TransportError
from .proofs import (
    CmProof,
    LinkProof,
    MbsProof,
    NNProof,
    prove_cm,
    prove_link,
    prove_mbs,
    prove_nn,
    verify_cm,
    verify_link,
    verify_mbs,
    verify_nn,
)
from .protocol import (
    STATUS_AVAILABLE,
    STATUS_OCCUPIED,
    STATUS_UNCONFIRMED,
    CredentialPublic,
    CredentialSecret,
    PublicBundle,
    Rejection,
)
from .server import DataEntry, Server, ServerConfig
from .signatures import ServerKeys, keygen, sign_credential, verify_credential
from .wire import WireError

__version__ = "0.1.0"

__all__ = [
    "Client",
    "ClientError",
    "CmProof",
    "Commitment",
    "CredentialPublic",
    "CredentialSecret",
    "DataEntry",
    "GrayImage",
    "GroupParams",
    "LinkProof",
    "MbsProof",
    "NNProof",
    "Opening",
    "PendingTicket",
    "ProtocolServer",
    "PublicBundle",
    "Rejection",
    "RemoteServer",
    "STATUS_AVAILABLE",
    "STATUS_OCCUPIED",
    "STATUS_UNCONFIRMED",
    "Server",
    "ServerConfig",
    "ServerKeys",
    "TransportError",
    "WireError",
    "blurriness",
    "commit",
    "edge_sharpness",
    "gen_params",
    "keygen",
    "combine",
    "commit_random",
    "verify_opening",
    "pinned_2048",
    "prove_cm",
    "prove_link",
    "prove_mbs",
    "prove_nn",
    "shift",
    "sign_credential",
    "verify_cm",
    "verify_link",
    "verify_mbs",
    "verify_nn",
    "__version__",
]
