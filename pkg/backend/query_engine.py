"""
DuckDB query engine for prediction logs
Aggregates per-sample predictions (in memory or from Parquet logs) into accuracy tables
"""
import json
import duckdb
from pathlib import Path
from typing import List, Dict, Any, Optional, Sequence
from datetime import datetime
import pandas as pd
import pyarrow as pa
import pyarrow.parquet as pq
import logging
from config import (
    COMPRESSION, DUCKDB_FILE, DUCKDB_MEMORY_LIMIT, DUCKDB_THREADS, PREDICTIONS_TABLE, ROW_GROUP_SIZE
)

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

PREDICTION_COLUMNS = ['sample_id', 'subject_id', 'predicted', 'correct', 'pace', 'covariate']


class PredictionQueryEngine:
    """SQL over prediction logs: one row per classified test sample"""

    def __init__(self, db_file: str = DUCKDB_FILE):
        self.db_file = db_file
        self.connection = None
        self._connect()

    def _connect(self):
        """Establish DuckDB connection with tuning"""
        try:
            self.connection = duckdb.connect(str(self.db_file))
            self.connection.execute(f"SET memory_limit='{DUCKDB_MEMORY_LIMIT}'")
            self.connection.execute(f"SET threads TO {DUCKDB_THREADS}")
            logger.debug(f"DuckDB connected: {self.db_file}")
        except Exception as e:
            logger.error(f"❌ DuckDB connection failed: {e}")
            raise

    def register_predictions(self, df: pd.DataFrame):
        """Expose a prediction DataFrame as the `predictions` view"""
        missing = [c for c in PREDICTION_COLUMNS if c not in df.columns]
        if missing:
            raise ValueError(f"prediction log is missing columns {missing}")
        frame = df.copy()
        frame['correct'] = frame['correct'].astype(bool)
        self.connection.register('predictions_df', frame)
        self.connection.execute(f"CREATE OR REPLACE VIEW {PREDICTIONS_TABLE} AS SELECT * FROM predictions_df")
        logger.debug(f"📊 Registered {len(frame)} predictions")

    def register_parquet(self, files: Sequence[Path]):
        """Expose one or more Parquet prediction logs as the `predictions` view"""
        files = [str(Path(f)).replace('\\', '/') for f in files]
        if not files:
            logger.warning("⚠️ No prediction logs to register")
            return
        pattern = "['" + "','".join(files) + "']"
        self.connection.execute(f"""
            CREATE OR REPLACE VIEW {PREDICTIONS_TABLE} AS
            SELECT * FROM read_parquet({pattern})
        """)
        logger.info(f"📊 Registered {len(files)} prediction log file(s)")

    def execute_sql(self, query: str) -> Dict[str, Any]:
        """
        Execute raw SQL against the registered logs

        Returns:
            Query results with metadata
        """
        try:
            start_time = datetime.now()
            result = self.connection.execute(query).fetchdf()
            duration = (datetime.now() - start_time).total_seconds()
            return {
                "status": "success",
                "data": result,
                "row_count": len(result),
                "columns": list(result.columns),
                "duration_seconds": round(duration, 3),
                "query": query
            }
        except Exception as e:
            logger.error(f"❌ Query failed: {e}")
            return {
                "status": "error",
                "message": str(e),
                "query": query
            }

    def _frame(self, query: str) -> pd.DataFrame:
        result = self.execute_sql(query)
        if result["status"] != "success":
            raise RuntimeError(result["message"])
        return result["data"]

    def accuracy_by(self, group_by: List[str]) -> pd.DataFrame:
        """Correct / total per group, with the group's sample count"""
        columns = ", ".join(group_by)
        return self._frame(f"""
            SELECT
                {columns},
                AVG(CAST(correct AS DOUBLE)) AS accuracy,
                COUNT(*) AS "count"
            FROM {PREDICTIONS_TABLE}
            GROUP BY {columns}
            ORDER BY {columns}
        """)

    def overall_accuracy(self) -> float:
        df = self._frame(f"SELECT AVG(CAST(correct AS DOUBLE)) AS accuracy FROM {PREDICTIONS_TABLE}")
        return float(df['accuracy'].iloc[0])

    def fraction_summary(self, group_by: Optional[List[str]] = None) -> pd.DataFrame:
        """
        Mean and standard deviation of per-repeat accuracy for every training fraction

        The log must carry `fraction` and `repeat` columns.
        """
        extra = list(group_by or [])
        keys = ", ".join(extra + ["fraction"])
        return self._frame(f"""
            WITH per_repeat AS (
                SELECT {keys}, "repeat", AVG(CAST(correct AS DOUBLE)) AS accuracy
                FROM {PREDICTIONS_TABLE}
                GROUP BY {keys}, "repeat"
            )
            SELECT
                {keys},
                AVG(accuracy) AS accuracy_mean,
                COALESCE(STDDEV_SAMP(accuracy), 0.0) AS accuracy_std,
                COUNT(*) AS repeats
            FROM per_repeat
            GROUP BY {keys}
            ORDER BY {keys}
        """)

    def get_statistics(self) -> Dict[str, Any]:
        """Row count and schema of the registered logs"""
        try:
            total = self.connection.execute(f"SELECT COUNT(*) FROM {PREDICTIONS_TABLE}").fetchone()[0]
            schema = self.connection.execute(f"DESCRIBE {PREDICTIONS_TABLE}").fetchdf()
            return {
                "status": "success",
                "statistics": {
                    "total_predictions": int(total),
                    "schema": schema.to_dict(orient='records'),
                }
            }
        except Exception as e:
            logger.error(f"❌ Statistics query failed: {e}")
            return {
                "status": "error",
                "message": str(e)
            }

    def close(self):
        """Close database connection"""
        if self.connection:
            self.connection.close()
            self.connection = None


def write_prediction_log(df: pd.DataFrame, path) -> Path:
    """Persist a prediction log as zstd Parquet"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pq.write_table(pa.Table.from_pandas(df, preserve_index=False), path,
                   compression=COMPRESSION, row_group_size=ROW_GROUP_SIZE)
    logger.info(f"💾 Wrote {len(df)} predictions to {path}")
    return path


def summarize_prediction_logs(files: Sequence[Path], group_by: Optional[List[str]] = None) -> Dict[str, Any]:
    """
    Accuracy summary of saved Parquet prediction logs

    Sweep logs (with `fraction` and `repeat` columns) also get the per-fraction mean and std;
    `group_by` adds accuracy per distinct value of those columns.
    """
    if not files:
        raise FileNotFoundError("no prediction logs to summarize")
    engine = PredictionQueryEngine()
    try:
        engine.register_parquet(files)
        stats = engine.get_statistics()
        if stats["status"] != "success":
            raise RuntimeError(stats["message"])
        columns = {c["column_name"] for c in stats["statistics"]["schema"]}
        unknown = sorted(set(group_by or []) - columns)
        if unknown:
            raise ValueError(f"prediction logs have no column(s) {unknown}; available: {sorted(columns)}")

        summary = {
            "total_predictions": stats["statistics"]["total_predictions"],
            "accuracy": engine.overall_accuracy(),
        }
        if {"fraction", "repeat"} <= columns:
            summary["fractions"] = _records(engine.fraction_summary())
        if group_by:
            summary["groups"] = _records(engine.accuracy_by(group_by))
        return summary
    finally:
        engine.close()


def _records(df: pd.DataFrame) -> List[Dict[str, Any]]:
    """JSON-ready rows (plain Python scalars)"""
    return json.loads(df.to_json(orient='records'))
