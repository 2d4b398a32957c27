"""salt-dialog: a neuro-symbolic task-oriented dialog toolkit for answering
"how much salt is in X?" questions.

Subpackages cover the pipeline end to end: parsing food descriptions into a
slot ontology (foodkb), generating an annotated clarification-dialog corpus
(convgen), tracking belief states (dst), correcting predicted salt values
against the knowledge base (nscorrect), scoring with standard TOD and
readability metrics (evalx, pipeline), and serving live chat sessions
(service, cli).
"""

__version__ = "0.1.0"
