import sqlite3
import json
import logging
from typing import Dict, Any, List, Optional
from datetime import datetime, timedelta

from ..models.config import RunStatus

logger = logging.getLogger(__name__)

class RunLogger:
    """Audit log of CLI runs, kept apart from the reports so those stay reproducible"""

    def __init__(self, db_path: str = "run_logs.db"):
        self.db_path = db_path
        self._init_database()

    def _init_database(self):
        """Initialize SQLite database with the run log table"""
        try:
            conn = sqlite3.connect(self.db_path)
            cursor = conn.cursor()

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS run_logs (
                    run_id TEXT PRIMARY KEY,
                    command TEXT NOT NULL,
                    config_hash TEXT,
                    seed INTEGER,
                    arguments TEXT NOT NULL,
                    status TEXT NOT NULL,
                    exit_code INTEGER,
                    start_time TEXT NOT NULL,
                    end_time TEXT,
                    execution_time_ms INTEGER,
                    error_message TEXT,
                    result_summary TEXT,
                    created_at TEXT NOT NULL
                )
            """)

            cursor.execute("""
                CREATE INDEX IF NOT EXISTS idx_run_logs_status
                ON run_logs(status)
            """)

            cursor.execute("""
                CREATE INDEX IF NOT EXISTS idx_run_logs_timestamp
                ON run_logs(start_time)
            """)

            conn.commit()
            conn.close()
            logger.debug("Run log database initialized")

        except Exception as e:
            logger.error(f"Failed to initialize run log database: {e}")
            raise

    def is_healthy(self) -> bool:
        """Check if the run log is usable"""
        try:
            conn = sqlite3.connect(self.db_path)
            cursor = conn.cursor()
            cursor.execute("SELECT COUNT(*) FROM run_logs")
            conn.close()
            return True
        except Exception as e:
            logger.error(f"Run log health check failed: {e}")
            return False

    def log_run_start(self, run_id: str, command: str, arguments: Dict[str, Any],
                      config_hash: Optional[str] = None, seed: Optional[int] = None):
        """Record the start of a CLI run"""
        try:
            conn = sqlite3.connect(self.db_path)
            cursor = conn.cursor()
            now = datetime.utcnow().isoformat()

            cursor.execute("""
                INSERT INTO run_logs (
                    run_id, command, config_hash, seed, arguments, status,
                    start_time, created_at
                ) VALUES (?, ?, ?, ?, ?, ?, ?, ?)
            """, (
                run_id,
                command,
                config_hash,
                seed,
                json.dumps(arguments, sort_keys=True, default=str),
                RunStatus.IN_PROGRESS.value,
                now,
                now
            ))

            conn.commit()
            conn.close()
            logger.info(f"Run {run_id} started: {command}")

        except Exception as e:
            logger.error(f"Failed to log run start for {run_id}: {e}")

    def log_run_config(self, run_id: str, config_hash: str, seed: Optional[int] = None):
        """Attach the loaded config's hash, and the effective seed, to a started run"""
        try:
            conn = sqlite3.connect(self.db_path)
            cursor = conn.cursor()
            cursor.execute("""
                UPDATE run_logs SET config_hash = ?, seed = COALESCE(seed, ?)
                WHERE run_id = ?
            """, (config_hash, seed, run_id))
            conn.commit()
            conn.close()

        except Exception as e:
            logger.error(f"Failed to log config hash for {run_id}: {e}")

    def _elapsed_ms(self, cursor, run_id: str):
        cursor.execute("SELECT start_time FROM run_logs WHERE run_id = ?", (run_id,))
        start_time = datetime.fromisoformat(cursor.fetchone()[0])
        end_time = datetime.utcnow()
        return end_time, int((end_time - start_time).total_seconds() * 1000)

    def log_run_success(self, run_id: str, exit_code: int, result: Dict[str, Any]):
        """Record a finished run; nonzero exit codes from checks still count as completed"""
        try:
            conn = sqlite3.connect(self.db_path)
            cursor = conn.cursor()
            end_time, execution_time = self._elapsed_ms(cursor, run_id)

            cursor.execute("""
                UPDATE run_logs SET
                    status = ?, exit_code = ?, end_time = ?, execution_time_ms = ?,
                    result_summary = ?
                WHERE run_id = ?
            """, (
                RunStatus.COMPLETED.value,
                exit_code,
                end_time.isoformat(),
                execution_time,
                self._generate_result_summary(result),
                run_id
            ))

            conn.commit()
            conn.close()
            logger.info(f"Run {run_id} completed with exit code {exit_code} in {execution_time}ms")

        except Exception as e:
            logger.error(f"Failed to log run success for {run_id}: {e}")

    def log_run_error(self, run_id: str, exit_code: int, error_message: str):
        """Record a run that stopped on an error"""
        try:
            conn = sqlite3.connect(self.db_path)
            cursor = conn.cursor()
            end_time, execution_time = self._elapsed_ms(cursor, run_id)

            cursor.execute("""
                UPDATE run_logs SET
                    status = ?, exit_code = ?, end_time = ?, execution_time_ms = ?,
                    error_message = ?
                WHERE run_id = ?
            """, (
                RunStatus.FAILED.value,
                exit_code,
                end_time.isoformat(),
                execution_time,
                error_message,
                run_id
            ))

            conn.commit()
            conn.close()
            logger.error(f"Run {run_id} failed after {execution_time}ms: {error_message}")

        except Exception as e:
            logger.error(f"Failed to log run error for {run_id}: {e}")

    def get_run(self, run_id: str) -> Optional[Dict[str, Any]]:
        """Retrieve a run record by ID"""
        try:
            conn = sqlite3.connect(self.db_path)
            conn.row_factory = sqlite3.Row
            cursor = conn.cursor()

            cursor.execute("SELECT * FROM run_logs WHERE run_id = ?", (run_id,))
            row = cursor.fetchone()
            conn.close()

            if row:
                record = dict(row)
                record["arguments"] = json.loads(record["arguments"])
                return record
            return None

        except Exception as e:
            logger.error(f"Failed to retrieve run {run_id}: {e}")
            return None

    def get_recent_runs(self, limit: int = 10) -> List[Dict[str, Any]]:
        """Most recent run records, newest first"""
        try:
            conn = sqlite3.connect(self.db_path)
            conn.row_factory = sqlite3.Row
            cursor = conn.cursor()

            cursor.execute("SELECT * FROM run_logs ORDER BY created_at DESC, rowid DESC LIMIT ?", (limit,))
            rows = cursor.fetchall()
            conn.close()

            records = []
            for row in rows:
                record = dict(row)
                record["arguments"] = json.loads(record["arguments"])
                records.append(record)
            return records

        except Exception as e:
            logger.error(f"Failed to retrieve recent runs: {e}")
            return []

    def get_run_stats(self, hours: int = 24) -> Dict[str, Any]:
        """Run counts and mean duration over the last hours"""
        try:
            conn = sqlite3.connect(self.db_path)
            cursor = conn.cursor()

            threshold = (datetime.utcnow() - timedelta(hours=hours)).isoformat()

            cursor.execute("""
                SELECT status, COUNT(*) FROM run_logs
                WHERE created_at >= ? GROUP BY status
            """, (threshold,))
            counts = dict(cursor.fetchall())

            cursor.execute("""
                SELECT AVG(execution_time_ms) FROM run_logs
                WHERE status = ? AND created_at >= ?
            """, (RunStatus.COMPLETED.value, threshold))
            avg_execution_time = cursor.fetchone()[0] or 0

            conn.close()

            total_runs = sum(counts.values())
            completed = counts.get(RunStatus.COMPLETED.value, 0)
            success_rate = (completed / total_runs * 100) if total_runs > 0 else 0

            return {
                "total_runs": total_runs,
                "completed_runs": completed,
                "failed_runs": counts.get(RunStatus.FAILED.value, 0),
                "success_percentage": round(success_rate, 2),
                "avg_execution_time_ms": round(avg_execution_time, 2),
                "time_period_hours": hours
            }

        except Exception as e:
            logger.error(f"Failed to get run stats: {e}")
            return {}

    def _generate_result_summary(self, result: Dict[str, Any]) -> str:
        """One-line summary of a run result"""
        if "sup_residual" in result:
            return f"Recovery via {result.get('method', 'unknown method')}, sup residual {result['sup_residual']:.3e}"
        elif "rows" in result:
            return f"Wrote {result['rows']} rows"
        elif "summary" in result:
            return str(result["summary"])
        else:
            return "Run finished"
