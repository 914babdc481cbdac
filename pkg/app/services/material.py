"""
Federation key material: one CA, one IdP, one SP and a population of clients.

Servers get both certificate kinds: an ECQV implicit certificate (FLAT) and an
explicit certificate over an even-y key (baseline). Clients get a pre-shared
K_CI for FLAT, and a keypair, explicit certificate and login credential for
the baseline. Everything is derived from the seed, so the same seed always
yields the same federation and the same files.
"""

import itertools
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

from app.config.settings import settings
from app.core.baseline.layout import CREDENTIAL_SIZE
from app.core.crypto import (
    CurvePoint,
    Scalar,
    SymmetricKey,
    decode_point,
    encode_point,
    gen_keypair_even_y,
    parse_scalar,
    public_key,
    scalar_bytes,
)
from app.core.exceptions import CertificateError, CryptoError, MaterialError
from app.core.flat.layout import K_CS_SIZE
from app.core.pki import (
    CertificateAuthority,
    EntityRole,
    ExplicitCertificate,
    IdentityInfo,
    ImplicitCertificate,
    ecqv_extract,
    ecqv_generate,
    ecqv_receive,
    ecqv_request,
    explicit_issue,
    explicit_verify,
)
from app.models.schemas import EntityRecord, MaterialManifest
from app.repositories.registry import ClientRegistry
from app.utils.rng import RandomSource, SeededRandomSource

logger = logging.getLogger(__name__)

IDP_ID = 0x000100
SP_ID = 0x000200
CLIENT_BASE_ID = 0x001000
IDP_DOMAIN = 1
SP_DOMAIN = 2

MANIFEST_FILE = "manifest.json"
CA_KEY_FILE = "ca.key"
CA_PUB_FILE = "ca.pub"


@dataclass
class EntityMaterial:
    entity_id: int
    role: EntityRole
    domain_id: int
    ecqv_sk: Optional[Scalar] = None
    implicit_cert: Optional[ImplicitCertificate] = None
    explicit_sk: Optional[Scalar] = None
    explicit_cert: Optional[ExplicitCertificate] = None
    k_ci: Optional[SymmetricKey] = None
    credential: bytes = b""


@dataclass
class Federation:
    seed: int
    ca: CertificateAuthority
    idp: EntityMaterial
    sp: EntityMaterial
    clients: List[EntityMaterial]

    @property
    def q_ca(self) -> CurvePoint:
        return self.ca.pk

    def client(self, run_index: int) -> EntityMaterial:
        """Run i is played by client i mod population size."""
        return self.clients[run_index % len(self.clients)]

    def client_registry(self) -> ClientRegistry:
        registry = ClientRegistry()
        for client in self.clients:
            registry.register(
                client.entity_id,
                k_ci=client.k_ci,
                certificate=client.explicit_cert,
                credential=client.credential,
            )
        return registry

    @property
    def entities(self) -> List[EntityMaterial]:
        return [self.idp, self.sp, *self.clients]


def identity_for(entity_id: int, domain_id: int, role: EntityRole, serial: int) -> IdentityInfo:
    not_before = settings.cert_not_before
    return IdentityInfo(
        entity_id=entity_id,
        domain_id=domain_id,
        role=role,
        serial=serial,
        not_before=not_before,
        not_after=not_before + settings.cert_lifetime_s,
    )


def issue_implicit(
    ca: CertificateAuthority, identity: IdentityInfo, rng: RandomSource
) -> Tuple[ImplicitCertificate, Scalar]:
    """Full ECQV exchange; returns (certificate, d_U)."""
    request, k_u = ecqv_request(identity, rng)
    cert, r = ecqv_generate(ca, request, rng)
    d_u, _ = ecqv_receive(cert, r, k_u, ca.pk)
    return cert, d_u


def issue_explicit(
    ca: CertificateAuthority, identity: IdentityInfo, rng: RandomSource
) -> Tuple[ExplicitCertificate, Scalar]:
    """Returns (certificate, private key)."""
    sk, pk = gen_keypair_even_y(rng)
    return explicit_issue(ca, identity, pk, rng), sk


def _server(
    ca: CertificateAuthority,
    entity_id: int,
    domain_id: int,
    role: EntityRole,
    serials: Iterator[int],
    rng: RandomSource,
) -> EntityMaterial:
    implicit, ecqv_sk = issue_implicit(
        ca, identity_for(entity_id, domain_id, role, next(serials)), rng
    )
    explicit, explicit_sk = issue_explicit(
        ca, identity_for(entity_id, domain_id, role, next(serials)), rng
    )
    return EntityMaterial(
        entity_id=entity_id,
        role=role,
        domain_id=domain_id,
        ecqv_sk=ecqv_sk,
        implicit_cert=implicit,
        explicit_sk=explicit_sk,
        explicit_cert=explicit,
    )


def build_federation(seed: int, client_count: Optional[int] = None) -> Federation:
    client_count = client_count or settings.client_count
    rng = SeededRandomSource(seed).derive("material")
    ca = CertificateAuthority.generate(rng)
    serials = itertools.count(1)

    idp = _server(ca, IDP_ID, IDP_DOMAIN, EntityRole.IDP, serials, rng)
    sp = _server(ca, SP_ID, SP_DOMAIN, EntityRole.SP, serials, rng)
    clients = []
    for index in range(client_count):
        entity_id = CLIENT_BASE_ID + index
        explicit, explicit_sk = issue_explicit(
            ca, identity_for(entity_id, IDP_DOMAIN, EntityRole.CLIENT, next(serials)), rng
        )
        clients.append(
            EntityMaterial(
                entity_id=entity_id,
                role=EntityRole.CLIENT,
                domain_id=IDP_DOMAIN,
                explicit_sk=explicit_sk,
                explicit_cert=explicit,
                k_ci=SymmetricKey.from_bytes(rng.token_bytes(K_CS_SIZE)),
                credential=rng.token_bytes(CREDENTIAL_SIZE),
            )
        )
    logger.info("federation built seed=%d clients=%d", seed, client_count)
    return Federation(seed=seed, ca=ca, idp=idp, sp=sp, clients=clients)


# =============================================================================
# Files
# =============================================================================

def _entity_files(entity: EntityMaterial) -> Dict[str, bytes]:
    files: Dict[str, bytes] = {}
    if entity.ecqv_sk is not None:
        files["ecqv.key"] = scalar_bytes(entity.ecqv_sk)
        files["implicit.cert"] = entity.implicit_cert.to_bytes()
    if entity.explicit_sk is not None:
        files["explicit.key"] = scalar_bytes(entity.explicit_sk)
        files["explicit.cert"] = entity.explicit_cert.to_bytes()
    if entity.k_ci is not None:
        files["kci"] = entity.k_ci.to_bytes()
    if entity.credential:
        files["credential"] = entity.credential
    return files


def setup_material(out_dir, seed: int, client_count: Optional[int] = None) -> MaterialManifest:
    """Write hex-encoded key and certificate files plus a manifest."""
    federation = build_federation(seed, client_count)
    root = Path(out_dir)
    records = []
    try:
        root.mkdir(parents=True, exist_ok=True)
        (root / CA_KEY_FILE).write_text(scalar_bytes(federation.ca.sk).hex())
        (root / CA_PUB_FILE).write_text(encode_point(federation.q_ca).hex())
        for entity in federation.entities:
            prefix = f"{entity.role.name.lower()}-{entity.entity_id:06x}"
            names = {}
            for kind, data in _entity_files(entity).items():
                name = f"{prefix}.{kind}"
                (root / name).write_text(data.hex())
                names[kind] = name
            records.append(
                EntityRecord(
                    entity_id=entity.entity_id,
                    role=entity.role.name.lower(),
                    domain_id=entity.domain_id,
                    files=names,
                )
            )
        manifest = MaterialManifest(seed=seed, curve=settings.curve, entities=records)
        (root / MANIFEST_FILE).write_text(manifest.model_dump_json(indent=2))
    except OSError as exc:
        raise MaterialError(f"cannot write material to {root}: {exc}") from exc
    logger.info("material written dir=%s entities=%d", root, len(records))
    return manifest


def _read_hex(root: Path, name: str) -> bytes:
    try:
        return bytes.fromhex((root / name).read_text().strip())
    except (OSError, ValueError) as exc:
        raise MaterialError(f"unreadable material file {name}: {exc}") from exc


def _load_entity(root: Path, record: EntityRecord, q_ca: CurvePoint) -> EntityMaterial:
    try:
        role = EntityRole[record.role.upper()]
    except KeyError:
        raise MaterialError(f"unknown role {record.role!r} in manifest") from None
    entity = EntityMaterial(entity_id=record.entity_id, role=role, domain_id=record.domain_id)
    files = record.files
    now = settings.sim_epoch
    try:
        if "ecqv.key" in files:
            entity.ecqv_sk = parse_scalar(_read_hex(root, files["ecqv.key"]))
            entity.implicit_cert = ImplicitCertificate.from_bytes(
                _read_hex(root, files["implicit.cert"])
            )
            if ecqv_extract(q_ca, entity.implicit_cert) != public_key(entity.ecqv_sk):
                raise MaterialError(
                    f"implicit certificate of {record.entity_id:06x} does not match key"
                )
        if "explicit.key" in files:
            entity.explicit_sk = parse_scalar(_read_hex(root, files["explicit.key"]))
            entity.explicit_cert = ExplicitCertificate.from_bytes(
                _read_hex(root, files["explicit.cert"])
            )
            if not explicit_verify(q_ca, entity.explicit_cert, now):
                raise MaterialError(f"explicit certificate of {record.entity_id:06x} rejected")
            if entity.explicit_cert.public_key() != public_key(entity.explicit_sk):
                raise MaterialError(
                    f"explicit certificate of {record.entity_id:06x} does not match key"
                )
        if "kci" in files:
            entity.k_ci = SymmetricKey.from_bytes(_read_hex(root, files["kci"]))
        if "credential" in files:
            entity.credential = _read_hex(root, files["credential"])
    except KeyError as exc:
        raise MaterialError(f"manifest entry for {record.entity_id:06x} lacks {exc}") from None
    except (CertificateError, CryptoError, ValueError) as exc:
        raise MaterialError(f"invalid material for {record.entity_id:06x}: {exc}") from exc
    return entity


def load_material(material_dir) -> Federation:
    root = Path(material_dir)
    try:
        manifest = MaterialManifest.model_validate(json.loads((root / MANIFEST_FILE).read_text()))
    except OSError as exc:
        raise MaterialError(f"no manifest in {root}: {exc}") from exc
    except ValueError as exc:
        raise MaterialError(f"invalid manifest in {root}: {exc}") from exc
    if manifest.curve != settings.curve:
        raise MaterialError(
            f"material is for {manifest.curve}, configured curve is {settings.curve}"
        )

    ids = [record.entity_id for record in manifest.entities]
    if len(ids) != len(set(ids)):
        raise MaterialError("manifest lists an entity id more than once")

    try:
        ca = CertificateAuthority(parse_scalar(_read_hex(root, manifest.ca_file)))
        if decode_point(_read_hex(root, CA_PUB_FILE)) != ca.pk:
            raise MaterialError("CA public key does not match the CA private key")
    except CryptoError as exc:
        raise MaterialError(f"invalid CA material: {exc}") from exc

    entities = [_load_entity(root, record, ca.pk) for record in manifest.entities]
    by_role: Dict[EntityRole, List[EntityMaterial]] = {role: [] for role in EntityRole}
    for entity in entities:
        by_role[entity.role].append(entity)
        for cert in (entity.implicit_cert, entity.explicit_cert):
            if cert is not None:
                try:
                    ca.reserve_serial(cert.identity.serial)
                except CertificateError as exc:
                    raise MaterialError(str(exc)) from exc
    if len(by_role[EntityRole.IDP]) != 1 or len(by_role[EntityRole.SP]) != 1:
        raise MaterialError("material must hold exactly one IdP and one SP")
    if not by_role[EntityRole.CLIENT]:
        raise MaterialError("material holds no clients")

    logger.info("material loaded dir=%s entities=%d", root, len(entities))
    return Federation(
        seed=manifest.seed,
        ca=ca,
        idp=by_role[EntityRole.IDP][0],
        sp=by_role[EntityRole.SP][0],
        clients=sorted(by_role[EntityRole.CLIENT], key=lambda c: c.entity_id),
    )
