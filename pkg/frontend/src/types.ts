/**
 * Payload shapes of the gflowstate JSON API.
 *
 * Field names mirror the wire format exactly (snake_case) so responses can be
 * used without a mapping layer.
 */

/** Environment-provided drawing instruction for one or many states. */
export interface RenderSpec {
  kind: string;
  payload: {
    height: number;
    /** grid_highlight: explicit cells. */
    cells?: [number, number][];
    /** grid_density: state key -> sample count. */
    counts?: Record<string, number>;
  };
}

export interface RunDoc {
  env: string;
  status: string;
  iterations: number;
  batch_size: number;
  seed: number;
  iteration_lo: number;
  iteration_hi: number;
  sample_count: number;
  distinct_terminals: number;
  validation_count: number;
  analyzed: boolean;
  height?: number;
  env_config: Record<string, unknown>;
  train_config: Record<string, unknown>;
  summary: Record<string, unknown> | null;
}

export interface SampleRow {
  trajectory_id: number;
  iteration: number;
  terminal_key: string;
  reward: number;
  loss: number;
  log_ptx: number | null;
}

export interface SamplesDoc {
  from: number;
  to: number;
  samples: SampleRow[];
}

export interface RankingEntry {
  key: string;
  rank: number;
  value: number;
  first_ranked_iteration: number;
}

export interface RankingFrame {
  iteration: number;
  entries: RankingEntry[];
}

export interface RankingDoc {
  metric: string;
  n: number;
  from: number;
  to: number;
  frames: RankingFrame[];
}

export interface ProjectionBin {
  q: number;
  r: number;
  center: [number, number];
  count_samples: number;
  count_validation: number;
  mean_reward: number | null;
  mean_loss: number | null;
  correlation: number | null;
  odds_score: number | null;
}

export interface ProjectionDoc {
  mode: 'binned';
  method: string;
  from: number;
  to: number;
  totals: { samples: number; validation: number };
  resolution: number;
  origin: [number, number];
  radius: number;
  bins: ProjectionBin[];
}

export interface ScatterPoint {
  trajectory_id: number;
  iteration: number;
  terminal_key: string;
  reward: number;
  loss: number;
  x: number;
  y: number;
}

export interface ScatterValidationPoint {
  state_key: string;
  reward: number;
  x: number;
  y: number;
}

export interface ScatterDoc {
  mode: 'scatter';
  method: string;
  from: number;
  to: number;
  totals: { samples: number; validation: number };
  points: ScatterPoint[];
  validation: ScatterValidationPoint[];
}

export interface BinDetailDoc extends ProjectionBin {
  loss_series: { iteration: number; mean_loss: number }[];
  reward_histogram: { log_edges: number[]; counts: number[] };
  sample_ids: number[];
  validation_keys: string[];
  render: RenderSpec;
  from: number;
  to: number;
}

export interface DagNodeDoc {
  key: string;
  depth: number;
  visit_count: number;
  first_iteration: number;
  terminal_count: number;
  stop: { frequency: number; mean_p_forward: number } | null;
  render: RenderSpec;
}

export interface DagEdgeDoc {
  src: string;
  dst: string;
  contracted_path: string[];
  frequency: number;
  mean_p_forward: number;
  mean_p_backward: number;
  active_iterations: number[];
}

export interface SessionDoc {
  session: string;
  from: number;
  to: number;
  root: string;
  truncated: boolean;
  pinned: string[];
  nodes: DagNodeDoc[];
  edges: DagEdgeDoc[];
  /** Pinned key -> number of aggregated (unpinned) children. */
  placeholders: Record<string, number>;
}

export interface ChildRow {
  key: string;
  frequency: number;
  mean_p_forward: number;
  max_p_forward: number;
  first_iteration: number;
  trajectory_count: number;
  contracted_path: string[];
}

export interface ChildrenDoc {
  key: string;
  from: number;
  to: number;
  children: ChildRow[];
}

export interface TransitionRow {
  src: string;
  dst: string;
  terminal: boolean;
  value: number;
  probability: number;
  variance: number;
  frequency: number;
  active_iterations: number[];
  rank: number;
}

export interface TransitionsDoc {
  metric: string;
  direction: string;
  from: number;
  to: number;
  rows: TransitionRow[];
}

export interface HistoryPoint {
  iteration: number;
  p_forward: number;
  p_backward: number;
}

export interface HistoryDoc {
  src: string;
  dst: string;
  terminal: boolean;
  from: number;
  to: number;
  series: HistoryPoint[];
}

export interface TrajectoryStep {
  src: string;
  dst: string;
  action: string;
  p_forward: number;
  p_backward: number;
  terminal: boolean;
}

export interface ThroughTrajectory {
  trajectory_id: number;
  iteration: number;
  terminal_key: string;
  steps: TrajectoryStep[];
}

export interface ThroughDoc {
  key: string;
  from: number;
  to: number;
  trajectories: ThroughTrajectory[];
}

export interface SelectionPin {
  trajectory_id: number;
  keys: string[];
  edges: [string, string][];
}

/** Resolve payload for samples, bin and edges selections. */
export interface ResolveDoc {
  kind: string;
  from: number;
  to: number;
  trajectory_ids: number[];
  ranking_keys: string[];
  projection_ids: number[];
  pins: SelectionPin[];
  bins?: [number, number][];
  edges?: { src: string; dst: string; terminal: boolean }[];
}

/** Resolve payload for node selections (trajectories through a state). */
export interface NodeResolveDoc {
  kind: 'node';
  from: number;
  to: number;
  nodes: { key: string; trajectories: ThroughTrajectory[] }[];
}

export interface RenderStateDoc {
  key: string;
  render: RenderSpec;
}

export interface RenderStatesDoc {
  count: number;
  render: RenderSpec;
}

/** Edge identity as sent to the selection resolver. */
export interface EdgeRef {
  src: string;
  dst: string;
  terminal: boolean;
}
