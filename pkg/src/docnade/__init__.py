"""DocNADE, Deep DocNADE and the DocNADE language model, in NumPy."""
from .corpus import Document, SplitContext, Vocabulary
from .deep_docnade import DeepDocNadeModel, EnsembleSpec, ensemble_logprob
from .docnade import DocNadeModel
from .docnade_lm import DocNadeLmModel
from .vocab_tree import BinaryWordTree, ClassPartition, build_class_partition, build_huffman_tree, build_random_tree

__all__ = [
    "BinaryWordTree", "ClassPartition", "DeepDocNadeModel", "DocNadeLmModel", "DocNadeModel", "Document",
    "EnsembleSpec", "SplitContext", "Vocabulary", "build_class_partition", "build_huffman_tree",
    "build_random_tree", "ensemble_logprob",
]
