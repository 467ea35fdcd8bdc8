"""
replaygauge - implicit like/dislike mining, collaborative filtering and
post-filtering of music recommendations from listening durations and replays.
"""
__version__ = "1.0.0"
