"""subrag: a graph-centric retrieval-augmented-generation engine.

The pipeline runs in five stages, each usable on its own:

1. indexing      - ``build_index`` over node embeddings (exact search)
2. node retrieval - ``knn_query`` / ``batch_knn``
3. graph retrieval - ``bfs_expand``, ``steiner_subgraph``, ``dense_subgraph``,
   all batched through ``batch_retrieve`` with reusable scratch buffers
4. serialization - ``serialize_subgraph`` under a token budget
5. generation    - ``MockClient`` (deterministic) or ``HttpClient``

``RagPipeline`` ties the stages together; ``bench`` holds the naive reference
implementations and the timing harness that contrasts them with the batched
kernels.

Quick start::

    import numpy as np
    from subrag import (MockClient, RagPipeline, RetrievalConfig,
                        build_graph, build_index, pipeline_answer)

    g = build_graph([(0, 1), (1, 2)], node_count=3)
    index = build_index(np.eye(3))
    pipe = RagPipeline(graph=g, attrs=None, index=index,
                       retrieval_cfg=RetrievalConfig(method="bfs", hops=1),
                       client=MockClient(), budget=256)
    answer = pipeline_answer(pipe, "what connects node 0?", np.eye(3)[0], k=1)

See the ``demos/`` scripts for one walkthrough per capability.
"""

from .applications import (
    CompletionMethod,
    RougeScores,
    Score,
    abstract_generation_run,
    complete_features,
    ndcg_at_k,
    recall_at_k,
    reconstruction_error,
    rouge,
)
from .bench import (
    BenchConfig,
    BenchRecord,
    NaiveGraph,
    SyntheticGraphSpec,
    gen_graph,
    naive_bfs,
    naive_steiner,
    parse_graph_spec,
    run_bench,
)
from .generation import (
    GenerationRequest,
    GenerationResult,
    HttpClient,
    MockClient,
    RetryPolicy,
    generate,
    with_retry,
)
from .graph import (
    Graph,
    NodeAttributes,
    Provenance,
    Subgraph,
    build_graph,
    induced_subgraph,
    neighbors,
    validate,
)
from .index import EmbeddingIndex, RetrievalHit, batch_knn, build_index, knn_query
from .io import load_edge_list, load_graph, load_node_records, save_graph
from .pipeline import (
    Dataset,
    PipelineAnswer,
    RagPipeline,
    StageError,
    compose,
    hash_embed,
    hash_embed_texts,
    identity,
    load_dataset,
    mask_features,
    pipeline_answer,
    pipeline_answer_batch,
    stage,
)
from .prompt import (
    DEFAULT_TEMPLATE,
    PromptBundle,
    PromptTemplate,
    build_prompt,
    estimate_tokens,
    load_template,
    serialize_subgraph,
)
from .retrieval import (
    FailedQuery,
    NodeFilter,
    RetrievalConfig,
    ScratchSpace,
    batch_bfs_nodes,
    batch_retrieve,
    bfs_expand,
    dense_subgraph,
    filter_nodes,
    multi_source_distances,
    ppr_scores,
    steiner_subgraph,
)

__version__ = "0.1.0"
