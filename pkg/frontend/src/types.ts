// JSON schemas of the reground HTTP service, mirrored 1:1.

export interface SourceRef {
  chunk_index: number;
  chunk_id: string;
  source_file: string;
  section_title: string;
  page: number;
}

export interface QueryRequest {
  question: string;
  top_k?: number;
  keep_k?: number;
  preprocess?: boolean;
  stream?: boolean;
  reasoning_effort?: 'low' | 'medium' | 'high';
  session_id?: string;
}

export interface QueryResponse {
  answer: string;
  sources: SourceRef[];
  audit_id: string;
  citations: number[];
  truncated: boolean;
}

export type OperationField =
  | 'mass_category'
  | 'flight_mode'
  | 'ground_environment'
  | 'airspace_type'
  | 'altitude_category';

export type OperationInput = Record<OperationField, string>;

export interface IndicatorRequest {
  op: OperationInput;
  indicators: string[];
  runs?: number;
}

export interface IndicatorResult {
  name: string;
  value: string | null;
  explanation: string;
  vote_count: number;
  value_consistency: number;
  inconclusive: boolean;
  tied_values: string[];
  invalid_value: boolean;
  low_confidence: boolean;
  parse_failures: number;
  sources: SourceRef[];
}

export interface IndicatorResponse {
  op: OperationInput;
  indicators: Record<string, IndicatorResult>;
  warnings: string[];
  audit_ids: Record<string, string>;
}

export interface ChunkResponse {
  chunk_id: string;
  chunk_title: string;
  chunk_text: string;
  chunk_summary: string;
  chunk_keywords: string[];
  source_file: string;
  section_title: string;
  page: number;
  kind: 'article' | 'amc' | 'gm' | 'table';
  position: number;
}

export interface FieldErrorDetail {
  field: string;
  value?: string;
  error: string;
}
