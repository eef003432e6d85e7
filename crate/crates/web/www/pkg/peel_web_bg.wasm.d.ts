/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_boundaryexplorer_free: (a: number, b: number) => void;
export const __wbg_peeldemo_free: (a: number, b: number) => void;
export const boundaryexplorer_cols: (a: number) => number;
export const boundaryexplorer_grasp_node: (a: number) => number;
export const boundaryexplorer_new: (a: number) => [number, number, number];
export const boundaryexplorer_reset: (a: number) => void;
export const boundaryexplorer_rows: (a: number) => number;
export const boundaryexplorer_states: (a: number) => [number, number];
export const boundaryexplorer_toggle: (a: number, b: number) => void;
export const peeldemo_detached_count: (a: number) => number;
export const peeldemo_done: (a: number) => number;
export const peeldemo_dressing_positions: (a: number) => [number, number];
export const peeldemo_dressing_states: (a: number) => [number, number];
export const peeldemo_effector_path: (a: number) => [number, number];
export const peeldemo_landmark_displacements: (a: number) => [number, number];
export const peeldemo_landmark_positions: (a: number) => [number, number];
export const peeldemo_last_direction: (a: number) => [number, number];
export const peeldemo_loss_map: (a: number, b: number, c: number) => [number, number];
export const peeldemo_max_history: (a: number) => [number, number];
export const peeldemo_mean_history: (a: number) => [number, number];
export const peeldemo_new: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const peeldemo_pair_count: (a: number) => number;
export const peeldemo_skin_positions: (a: number) => [number, number];
export const peeldemo_skin_rows: (a: number) => number;
export const peeldemo_status: (a: number) => [number, number];
export const peeldemo_step: (a: number) => number;
export const peeldemo_steps: (a: number) => number;
export const penalty: (a: number, b: number) => number;
export const peeldemo_dressing_rows: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
