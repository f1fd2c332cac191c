"""Structured audit lines: one JSON object per event, keyed by record id."""

import json
import logging

logger = logging.getLogger("cmcurate.audit")


def audit(event: str, **fields):
    if logger.isEnabledFor(logging.INFO):
        logger.info(json.dumps({"event": event, **fields}, ensure_ascii=False, sort_keys=True, default=str))
