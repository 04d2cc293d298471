import json

import pytest
import requests

from verifier_service.scoring import load_scorer
from verifier_service.server import ScorerServer
from verifier_service.training import TrainSpec, train_fold, write_lexical_artifact

from conftest import SENTINEL, synthetic_pairs


@pytest.fixture(scope="module")
def served_artifact(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("artifact")
    spec = TrainSpec(k=3, trained_on_folds=[0, 1], epochs=8, seed=1)
    artifact = train_fold(spec, synthetic_pairs(150), tmp / "fold-2")
    server = ScorerServer(load_scorer(artifact), port=0).start()
    yield server
    server.stop()


class TestProtocol:
    def test_info_matches_train_spec(self, served_artifact):
        info = requests.get(served_artifact.url + "/info").json()
        assert info["trained_on_folds"] == [0, 1]
        assert info["scorer_id"] == "tiny-encoder"

    def test_score_separable_positives(self, served_artifact):
        held_out_positives = [
            p for p in synthetic_pairs(150) if p["fold"] == 2 and p["label"] == 1
        ]
        for pair in held_out_positives[:5]:
            response = requests.post(
                served_artifact.url + "/score",
                json={"context": pair["context"], "claim": pair["claim"], "fold": 2},
            )
            assert response.status_code == 200
            assert response.json()["prob"] > 0.5

    def test_prob_always_in_unit_interval(self, served_artifact):
        for claim in ("a", "b c d", SENTINEL):
            prob = requests.post(
                served_artifact.url + "/score",
                json={"context": "x: 1st percentile", "claim": claim},
            ).json()["prob"]
            assert 0.0 <= prob <= 1.0

    def test_malformed_request_400(self, served_artifact):
        response = requests.post(served_artifact.url + "/score", json={"claim": 7})
        assert response.status_code == 400
        assert "error" in response.json()

    def test_unknown_endpoint_404(self, served_artifact):
        assert requests.get(served_artifact.url + "/nope").status_code == 404

    def test_lexical_artifact_served(self, tmp_path):
        artifact = write_lexical_artifact(tmp_path / "lex")
        server = ScorerServer(load_scorer(artifact), port=0).start()
        try:
            info = requests.get(server.url + "/info").json()
            assert info["mode"] == "lexical"
            prob = requests.post(
                server.url + "/score",
                json={"context": "savings: high", "claim": "savings high"},
            ).json()["prob"]
            assert prob == 0.0
        finally:
            server.stop()
