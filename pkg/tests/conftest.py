from __future__ import annotations

from pathlib import Path

import pytest

from refdom import Session, load_kb

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture()
def kb_en():
    return load_kb(FIXTURES / "kb_en.json")


@pytest.fixture()
def kb_fr():
    return load_kb(FIXTURES / "kb_fr.json")


def dialogue_lines(name: str) -> list[str]:
    text = (FIXTURES / "dialogues" / name).read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def scene_path(name: str) -> str:
    return str(FIXTURES / "scenes" / name)


def run_dialogue(kb, dialogue: str, scene: str | None = None, **kwargs) -> Session:
    session = Session(kb, scene_path=scene_path(scene) if scene else None, **kwargs)
    session.process_dialogue(dialogue_lines(dialogue))
    return session
