"""precparse: precision-biased dependency parsing.

Parsers that can abstain from uncertain head attachments, driven either by
parser-ensemble disagreement or by a learned per-decision riskiness
classifier, with parse selection and full evaluation tooling.
"""

__version__ = "0.1.0"
