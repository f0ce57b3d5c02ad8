"""Pipeline configuration.

One INI file drives every stage; unknown sections or keys are rejected so
typos fail loudly, and all paths are resolved relative to the config file.
A single master seed is declared once; stages derive their own streams
from it by name.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .corpus import FilterRules, Judgment, normalize_flair_map
from .lexicon_analysis import MatchMode
from .topic_naming import packaged_fixture
from .validation_survey import QuestionMode

_PACKAGED = {
    "stopwords_file": "default_stopwords.txt",
    "lemma_file": "default_lemmas.tsv",
    "name_map_file": "cluster_name_map.tsv",
    "meta_file": "meta_categories.tsv",
}


def _parse_cutoff(raw: str) -> int:
    raw = raw.strip()
    if raw.lstrip("-").isdigit():
        return int(raw)
    dt = datetime.fromisoformat(raw)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _parse_flair_map(raw: str) -> dict[str, Judgment]:
    mapping: dict[str, str] = {}
    for line in raw.splitlines():
        line = line.strip()
        if not line:
            continue
        flair, _, judgment = line.rpartition(":")
        if not flair:
            raise ValueError(f"flair_map line {line!r} must look like '<flair>: <JUDGMENT>'")
        mapping[flair.strip()] = judgment.strip()
    return normalize_flair_map(mapping)


@dataclass
class CorpusConfig:
    posts_file: str = "posts.jsonl"
    comments_file: str = "comments.jsonl"
    flair_map: dict[str, Judgment] = field(default_factory=dict)
    title_prefixes: tuple[str, ...] = ("AITA", "WIBTA")
    min_body_words: int = 50
    min_comments: int = 10
    min_score: int = 1
    require_verdict: bool = True
    split_cutoff: int = _parse_cutoff("2019-12-31T23:59:59+00:00")

    def rules(self) -> FilterRules:
        return FilterRules(
            title_prefixes=self.title_prefixes,
            min_body_words=self.min_body_words,
            min_comments=self.min_comments,
            min_score=self.min_score,
            require_verdict=self.require_verdict,
        )


@dataclass
class TextprepConfig:
    stopwords_file: str = ""
    lemma_file: str = ""
    min_df: int = 20
    scrub: bool = True


@dataclass
class LdaConfig:
    k: int = 70
    alpha: float = 0.1
    beta: float = 0.01
    iterations: int = 500
    infer_sweeps: int = 50
    sweep_ks: tuple[int, ...] = (20, 40, 70, 100)
    sweep_iterations: int = 200
    validation_ratio: float = 0.8
    coherence_scope: str = "cluster"  # or "corpus"


@dataclass
class NamingConfig:
    random_source: str = "uniform"
    name_map_file: str = ""
    meta_file: str = ""


@dataclass
class SurveyConfig:
    mode: QuestionMode = QuestionMode.TOP4
    per_topic: int = 20
    responses_per_question: int = 3
    bank_id: str = ""  # falls back to the split name


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    data_dir: str = "service_data"
    answers_per_question: int = 3
    session_questions: int = 20
    session_timeout: float = 1800.0
    ui_dir: str = ""


@dataclass
class LexiconsConfig:
    empath_file: str = ""
    mfd_file: str = ""
    match_mode: str = ""
    use_lemmas: bool = True


@dataclass
class OutputConfig:
    dir: str = "out"
    top_pairs: int = 10
    top_categories: int = 50


@dataclass
class PipelineConfig:
    seed: int = 0
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    textprep: TextprepConfig = field(default_factory=TextprepConfig)
    lda: LdaConfig = field(default_factory=LdaConfig)
    naming: NamingConfig = field(default_factory=NamingConfig)
    survey: SurveyConfig = field(default_factory=SurveyConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)
    lexicons: LexiconsConfig = field(default_factory=LexiconsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    base_dir: Path = field(default_factory=Path.cwd)

    def resolve(self, path_value: str) -> Path:
        p = Path(path_value)
        return p if p.is_absolute() else self.base_dir / p

    def path_or_packaged(self, key: str, value: str) -> Path:
        if value:
            return self.resolve(value)
        return packaged_fixture(_PACKAGED[key])

    @property
    def output_dir(self) -> Path:
        return self.resolve(self.output.dir)

    def match_mode(self) -> MatchMode | None:
        return MatchMode(self.lexicons.match_mode.upper()) if self.lexicons.match_mode else None


_PARSERS = {
    "corpus": {
        "posts_file": str,
        "comments_file": str,
        "flair_map": _parse_flair_map,
        "title_prefixes": lambda s: tuple(x.strip() for x in s.split(",") if x.strip()),
        "min_body_words": int,
        "min_comments": int,
        "min_score": int,
        "require_verdict": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
        "split_cutoff": _parse_cutoff,
    },
    "textprep": {
        "stopwords_file": str,
        "lemma_file": str,
        "min_df": int,
        "scrub": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
    },
    "lda": {
        "k": int,
        "alpha": float,
        "beta": float,
        "iterations": int,
        "infer_sweeps": int,
        "sweep_ks": lambda s: tuple(int(x) for x in s.split(",") if x.strip()),
        "sweep_iterations": int,
        "validation_ratio": float,
        "coherence_scope": str,
    },
    "naming": {
        "random_source": str,
        "name_map_file": str,
        "meta_file": str,
    },
    "survey": {
        "mode": lambda s: QuestionMode(s.strip().upper()),
        "per_topic": int,
        "responses_per_question": int,
        "bank_id": str,
    },
    "service": {
        "host": str,
        "port": int,
        "data_dir": str,
        "answers_per_question": int,
        "session_questions": int,
        "session_timeout": float,
        "ui_dir": str,
    },
    "lexicons": {
        "empath_file": str,
        "mfd_file": str,
        "match_mode": str,
        "use_lemmas": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
    },
    "output": {
        "dir": str,
        "top_pairs": int,
        "top_categories": int,
    },
    "pipeline": {
        "seed": int,
    },
}


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    with path.open("r", encoding="utf-8") as fh:
        parser.read_file(fh)

    cfg = PipelineConfig(base_dir=path.resolve().parent)
    for section in parser.sections():
        if section not in _PARSERS:
            raise ValueError(f"{path}: unknown config section [{section}]")
        known = _PARSERS[section]
        for key, raw in parser.items(section):
            if key not in known:
                raise ValueError(f"{path}: unknown key {key!r} in section [{section}]")
            value = known[key](raw)
            if section == "pipeline":
                setattr(cfg, key, value)
            else:
                setattr(getattr(cfg, section), key, value)
    return cfg
