"""Per-target model selection for predicting useful study support tools and
learning strategies from Likert difficulty profiles, plus the psychometric
session data layer feeding it."""

__version__ = "0.1.0"
