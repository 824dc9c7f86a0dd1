/** Input that cannot be read or does not form a valid job. */
export class InputError extends Error {}

/** Requested encoder model cannot be loaded. */
export class ModelError extends Error {}
