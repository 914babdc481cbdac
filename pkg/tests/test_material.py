"""
Key material tests: generation, on-disk layout and validation on load.
"""

import json

import pytest

from app.core.exceptions import MaterialError
from app.core.pki import EntityRole
from app.models.schemas import Outcome, ProtocolKind, ScenarioConfig
from app.services.material import (
    CLIENT_BASE_ID,
    IDP_ID,
    MANIFEST_FILE,
    SP_ID,
    build_federation,
    load_material,
    setup_material,
)
from app.services.runner import run_scenario


@pytest.fixture
def material_dir(tmp_path):
    setup_material(tmp_path, seed=9, client_count=3)
    return tmp_path


def manifest(root) -> dict:
    return json.loads((root / MANIFEST_FILE).read_text())


def entity_files(root, entity_id: int) -> dict:
    return next(e for e in manifest(root)["entities"] if e["entity_id"] == entity_id)["files"]


# =============================================================================
# Generation
# =============================================================================

class TestFederation:
    def test_ids(self):
        federation = build_federation(seed=1, client_count=3)
        assert (federation.idp.entity_id, federation.sp.entity_id) == (IDP_ID, SP_ID)
        assert [c.entity_id for c in federation.clients] == [
            CLIENT_BASE_ID,
            CLIENT_BASE_ID + 1,
            CLIENT_BASE_ID + 2,
        ]

    def test_seed_reproduces_material(self):
        a, b = build_federation(seed=4, client_count=2), build_federation(seed=4, client_count=2)
        assert a.ca.sk == b.ca.sk
        assert a.idp.implicit_cert.to_bytes() == b.idp.implicit_cert.to_bytes()
        assert a.clients[1].k_ci.to_bytes() == b.clients[1].k_ci.to_bytes()

    def test_seeds_differ(self):
        assert build_federation(seed=4).ca.sk != build_federation(seed=5).ca.sk

    def test_serials_unique(self):
        federation = build_federation(seed=2, client_count=5)
        serials = [
            cert.identity.serial
            for entity in federation.entities
            for cert in (entity.implicit_cert, entity.explicit_cert)
            if cert is not None
        ]
        assert len(serials) == len(set(serials))

    def test_client_run_rotation(self):
        federation = build_federation(seed=2, client_count=3)
        assert federation.client(4) is federation.clients[1]


# =============================================================================
# Files
# =============================================================================

class TestFiles:
    def test_certificate_hex_lengths(self, material_dir):
        files = entity_files(material_dir, IDP_ID)
        assert len((material_dir / files["implicit.cert"]).read_text()) == 140
        assert len((material_dir / files["explicit.cert"]).read_text()) == 268

    def test_client_files(self, material_dir):
        assert set(entity_files(material_dir, CLIENT_BASE_ID)) == {
            "explicit.key",
            "explicit.cert",
            "kci",
            "credential",
        }

    def test_round_trip(self, material_dir):
        loaded = load_material(material_dir)
        generated = build_federation(seed=9, client_count=3)
        assert loaded.q_ca == generated.q_ca
        assert loaded.sp.role == EntityRole.SP
        assert [c.k_ci.to_bytes() for c in loaded.clients] == [
            c.k_ci.to_bytes() for c in generated.clients
        ]

    def test_same_seed_same_files(self, tmp_path):
        setup_material(tmp_path / "a", seed=3, client_count=1)
        setup_material(tmp_path / "b", seed=3, client_count=1)
        for path in sorted((tmp_path / "a").iterdir()):
            assert path.read_text() == (tmp_path / "b" / path.name).read_text()

    def test_runs_on_loaded_material(self, material_dir):
        cfg = ScenarioConfig(protocol=ProtocolKind.BASELINE, runs=3, material=str(material_dir))
        assert all(m.outcome == Outcome.GRANTED for m in run_scenario(cfg))


# =============================================================================
# Validation
# =============================================================================

class TestValidation:
    def test_missing_directory(self, tmp_path):
        with pytest.raises(MaterialError):
            load_material(tmp_path / "absent")

    def test_key_certificate_mismatch(self, material_dir):
        files = entity_files(material_dir, SP_ID)
        key = material_dir / files["ecqv.key"]
        key.write_text((material_dir / entity_files(material_dir, IDP_ID)["ecqv.key"]).read_text())
        with pytest.raises(MaterialError):
            load_material(material_dir)

    def test_tampered_explicit_certificate(self, material_dir):
        cert = material_dir / entity_files(material_dir, CLIENT_BASE_ID)["explicit.cert"]
        raw = bytearray.fromhex(cert.read_text())
        raw[40] ^= 0x01
        cert.write_text(raw.hex())
        with pytest.raises(MaterialError):
            load_material(material_dir)

    def test_not_hex(self, material_dir):
        (material_dir / entity_files(material_dir, CLIENT_BASE_ID)["kci"]).write_text("zz")
        with pytest.raises(MaterialError):
            load_material(material_dir)

    def test_duplicate_entity(self, material_dir):
        data = manifest(material_dir)
        data["entities"].append(data["entities"][-1])
        (material_dir / MANIFEST_FILE).write_text(json.dumps(data))
        with pytest.raises(MaterialError):
            load_material(material_dir)

    def test_wrong_curve(self, material_dir):
        data = manifest(material_dir)
        data["curve"] = "SECP256k1"
        (material_dir / MANIFEST_FILE).write_text(json.dumps(data))
        with pytest.raises(MaterialError):
            load_material(material_dir)
