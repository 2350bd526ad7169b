export { Graph, retrieve_batch } from "./graph.js";
export type { Edge, NodePayload, RetrievalOptions, SubgraphRecord } from "./graph.js";
export { Pipeline } from "./pipeline.js";
export type { AnswerRecord, PipelineOptions } from "./pipeline.js";
export { EngineError } from "./runner.js";
