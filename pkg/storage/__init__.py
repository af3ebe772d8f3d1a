"""
Storage package for hgpairs
"""

from .results_manager import ResultsManager
from .timetag_store import TimeTagStore

__all__ = ['ResultsManager', 'TimeTagStore']
