"""logforge: a miniature log analytics engine.

Pipeline: forwarders tail files and ship events over TCP to an indexer that
stores them in lifecycle-managed buckets; a pipeline query language searches
them; control rules flag web attacks; frequency and classification analytics
surface anomalies; a dashboard service ties it together over HTTP.
"""

__version__ = "0.1.0"

from .ingest import Event, RuleSet
from .index_store import IndexHandle, RollPolicy

__all__ = ["Event", "RuleSet", "IndexHandle", "RollPolicy", "__version__"]
