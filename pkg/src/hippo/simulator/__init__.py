"""User simulation engine, prompt templates, and port adapters."""

from .engine import (
    AnnotationError,
    MostWantedUnavailable,
    RetrievalError,
    Selection,
    SessionParams,
    SimulationError,
    SimulatorError,
    annotate_saliency,
    bootstrap_query,
    decide_retrieval,
    initial_preference,
    retrieve_candidates,
    run_session,
    select_videos,
    update_preference,
    watch_video,
)
from .ports import (
    API_KEY_ENV,
    FixtureCatalog,
    FrameCaptionerPort,
    HttpLanguageModel,
    LanguageModelPort,
    TranscriberPort,
    VideoCatalogPort,
    build_fixture_catalog,
)
from .prompts import TemplateError, load_template, render

__all__ = [
    "API_KEY_ENV",
    "AnnotationError",
    "FixtureCatalog",
    "FrameCaptionerPort",
    "HttpLanguageModel",
    "LanguageModelPort",
    "MostWantedUnavailable",
    "RetrievalError",
    "Selection",
    "SessionParams",
    "SimulationError",
    "SimulatorError",
    "TemplateError",
    "TranscriberPort",
    "VideoCatalogPort",
    "annotate_saliency",
    "bootstrap_query",
    "build_fixture_catalog",
    "decide_retrieval",
    "initial_preference",
    "load_template",
    "render",
    "retrieve_candidates",
    "run_session",
    "select_videos",
    "update_preference",
    "watch_video",
]
