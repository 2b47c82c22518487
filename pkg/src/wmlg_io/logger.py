#!/usr/bin/env python3
"""
Structured run logging for Monte Carlo experiments.
Keeps an in-memory event list (mirrored to the Python logger) that ends up in
the experiment's JSON provenance, including which candidate formula was
frozen for each ambiguous limit quantity.
"""

import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional


class RunLogger:
    """Event recorder for one experiment run."""

    def __init__(self, log_name: str = "experiment", output_dir: Optional[Path] = None):
        self.log_name = log_name
        self.output_dir = Path(output_dir) if output_dir else None

        self.events: List[Dict[str, Any]] = []
        self.frozen_variants: Dict[str, Dict[str, Any]] = {}
        self._start_time: Optional[datetime] = None

        self.logger = logging.getLogger(f"monte_carlo.{log_name}")

        if self.output_dir is not None:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            log_file = self.output_dir / f"{log_name}_{datetime.now().strftime('%Y%m%d')}.log"
            file_handler = logging.FileHandler(log_file)
            file_handler.setFormatter(logging.Formatter(
                '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
            ))
            self.logger.addHandler(file_handler)

    def _record(self, event_type: str, **payload) -> Dict[str, Any]:
        event = {
            'event_type': event_type,
            'timestamp': datetime.now().isoformat(),
            **payload,
        }
        self.events.append(event)
        return event

    def log_experiment_start(self, experiment: str, n: int, replications: int,
                             seed: Optional[int], settings: Dict[str, Any]):
        """Log the start of an experiment."""
        self._start_time = datetime.now()
        self._record('experiment_start', experiment=experiment, n=n,
                     replications=replications, seed=seed, settings=settings)
        self.logger.info(f"🚀 Starting {experiment}: n={n}, R={replications}, seed={seed}")

    def log_replication_batch(self, done: int, total: int, n: Optional[int] = None):
        """Log completion of a batch of replications."""
        self._record('replication_batch', done=done, total=total, n=n)
        size_info = f" (n={n})" if n is not None else ""
        self.logger.debug(f"🔄 {done}/{total} replications{size_info}")

    def log_variant_frozen(self, question: str, chosen: str, candidates: Dict[str, Any],
                           evidence: Dict[str, Any]):
        """Record which candidate formula was frozen for an ambiguous quantity."""
        event = self._record('variant_frozen', question=question, chosen=chosen,
                             candidates=candidates, evidence=evidence)
        self.frozen_variants[question] = event
        self.logger.info(f"🔒 {question}: frozen '{chosen}'")

    def log_experiment_complete(self, experiment: str, passed: bool,
                                summary: Dict[str, Any]):
        """Log experiment completion."""
        duration = 0.0
        if self._start_time is not None:
            duration = (datetime.now() - self._start_time).total_seconds()
        self._record('experiment_complete', experiment=experiment, passed=passed,
                     duration_seconds=duration, summary=summary)

        status = "✅ passed" if passed else "❌ failed"
        self.logger.info(f"{experiment} {status} in {duration:.1f} s")

    def log_error(self, error_type: str, error_message: str,
                  context: Optional[Dict[str, Any]] = None):
        """Log an experiment error."""
        self._record('error', error_type=error_type, error_message=error_message,
                     context=context or {})
        self.logger.error(f"💥 {error_type}: {error_message}")
        for key, value in (context or {}).items():
            self.logger.error(f"   {key}: {value}")

    def get_run_summary(self) -> Dict[str, Any]:
        """Summary of the recorded events."""
        starts = [e for e in self.events if e['event_type'] == 'experiment_start']
        completes = [e for e in self.events if e['event_type'] == 'experiment_complete']
        errors = [e for e in self.events if e['event_type'] == 'error']

        summary = {
            'experiments_started': len(starts),
            'experiments_completed': len(completes),
            'experiments_passed': sum(1 for e in completes if e['passed']),
            'error_count': len(errors),
            'frozen_variants': {q: e['chosen'] for q, e in self.frozen_variants.items()},
            'event_count': len(self.events),
        }
        if starts:
            summary['start_time'] = starts[0]['timestamp']
            summary['seed'] = starts[0]['seed']
        if completes:
            summary['end_time'] = completes[-1]['timestamp']
        return summary

    def export_events_json(self, output_path: Optional[Path] = None,
                           provenance: Optional[Dict[str, Any]] = None) -> Path:
        """Export all events with provenance to a JSON file."""
        if output_path is None:
            directory = self.output_dir or Path("logs")
            directory.mkdir(parents=True, exist_ok=True)
            timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
            output_path = directory / f"{self.log_name}_events_{timestamp}.json"

        export_data = {
            'export_info': {
                'log_name': self.log_name,
                'export_timestamp': datetime.now().isoformat(),
                'event_count': len(self.events),
            },
            'provenance': provenance or {},
            'run_summary': self.get_run_summary(),
            'events': self.events,
        }

        with open(output_path, 'w', encoding='utf-8') as f:
            json.dump(export_data, f, indent=2, default=str)

        self.logger.info(f"📄 Exported {len(self.events)} events to {output_path}")
        return Path(output_path)
