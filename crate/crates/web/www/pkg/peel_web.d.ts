/* tslint:disable */
/* eslint-disable */

/**
 * Click dressing nodes to detach or reattach them and watch V¹ and V² follow.
 */
export class BoundaryExplorer {
    free(): void;
    [Symbol.dispose](): void;
    cols(): number;
    /**
     * Dressing node currently standing in for an empty detached set.
     */
    grasp_node(): number;
    constructor(size: number);
    reset(): void;
    rows(): number;
    states(): Uint8Array;
    /**
     * Flip the pair under dressing node `node` (row-major, 0-based).
     */
    toggle(node: number): void;
}

/**
 * One peel, advanced a control step at a time from JS.
 */
export class PeelDemo {
    free(): void;
    [Symbol.dispose](): void;
    detached_count(): number;
    done(): boolean;
    dressing_positions(): Float64Array;
    dressing_rows(): number;
    dressing_states(): Uint8Array;
    effector_path(): Float64Array;
    /**
     * Current displacement of each landmark from rest, mm.
     */
    landmark_displacements(): Float64Array;
    landmark_positions(): Float64Array;
    /**
     * Last committed direction as `[azimuth, elevation]` in radians.
     */
    last_direction(): Float64Array;
    /**
     * MPC loss for repeating each direction over the horizon from the current state.
     * Directions cover azimuth `[0, 2π)` × elevation `[-15°, 90°]`, row-major by elevation.
     */
    loss_map(n_azimuth: number, n_elevation: number): Float64Array;
    max_history(): Float64Array;
    /**
     * Mean landmark displacement per step, mm.
     */
    mean_history(): Float64Array;
    /**
     * `method` is `up`, `arc` or `mpc`. `seeds` and `horizon` only matter for MPC.
     */
    constructor(method: string, size: number, seeds: number, horizon: number, rng_seed: number);
    pair_count(): number;
    /**
     * Skin grid node positions, xyz interleaved, row-major.
     */
    skin_positions(): Float64Array;
    skin_rows(): number;
    status(): string;
    /**
     * Advance one control step. Returns false once the peel has finished or failed.
     */
    step(): boolean;
    steps(): number;
}

/**
 * `exp(−min(φ − σ, 0))`, both lengths in mm.
 */
export function penalty(phi_mm: number, sigma_mm: number): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_boundaryexplorer_free: (a: number, b: number) => void;
    readonly __wbg_peeldemo_free: (a: number, b: number) => void;
    readonly boundaryexplorer_cols: (a: number) => number;
    readonly boundaryexplorer_grasp_node: (a: number) => number;
    readonly boundaryexplorer_new: (a: number) => [number, number, number];
    readonly boundaryexplorer_reset: (a: number) => void;
    readonly boundaryexplorer_rows: (a: number) => number;
    readonly boundaryexplorer_states: (a: number) => [number, number];
    readonly boundaryexplorer_toggle: (a: number, b: number) => void;
    readonly peeldemo_detached_count: (a: number) => number;
    readonly peeldemo_done: (a: number) => number;
    readonly peeldemo_dressing_positions: (a: number) => [number, number];
    readonly peeldemo_dressing_states: (a: number) => [number, number];
    readonly peeldemo_effector_path: (a: number) => [number, number];
    readonly peeldemo_landmark_displacements: (a: number) => [number, number];
    readonly peeldemo_landmark_positions: (a: number) => [number, number];
    readonly peeldemo_last_direction: (a: number) => [number, number];
    readonly peeldemo_loss_map: (a: number, b: number, c: number) => [number, number];
    readonly peeldemo_max_history: (a: number) => [number, number];
    readonly peeldemo_mean_history: (a: number) => [number, number];
    readonly peeldemo_new: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly peeldemo_pair_count: (a: number) => number;
    readonly peeldemo_skin_positions: (a: number) => [number, number];
    readonly peeldemo_skin_rows: (a: number) => number;
    readonly peeldemo_status: (a: number) => [number, number];
    readonly peeldemo_step: (a: number) => number;
    readonly peeldemo_steps: (a: number) => number;
    readonly penalty: (a: number, b: number) => number;
    readonly peeldemo_dressing_rows: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
