import json

import pytest


@pytest.fixture
def media_manifest(tmp_path):
    """Two-scene, 70 s clip at 30 fps with a transcript."""
    manifest = {
        "content_id": "m1",
        "duration_s": 70.0,
        "fps": 30.0,
        "scenes": [
            {"start_s": 0.0, "end_s": 40.0},
            {"start_s": 40.0, "end_s": 70.0},
        ],
        "transcript": [
            {"start_s": 2.0, "end_s": 10.0, "text": "Alice is cooking dinner"},
            {"start_s": 45.0, "end_s": 55.0, "text": "a dog runs on the beach"},
        ],
    }
    path = tmp_path / "media.json"
    path.write_text(json.dumps(manifest))
    return path
