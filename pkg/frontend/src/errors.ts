/** Typed errors raised before or while delegating to the core CLI. */

/** An input array has the wrong dtype (everything tensor-like must be Float32Array). */
export class DtypeError extends TypeError {
  constructor(message: string) {
    super(message);
    this.name = "DtypeError";
  }
}

/** An input array has the wrong length or the levels break pyramid invariants. */
export class DimensionError extends RangeError {
  constructor(message: string) {
    super(message);
    this.name = "DimensionError";
  }
}

/** The core CLI exited nonzero; carries its stderr diagnostic. */
export class CliError extends Error {
  readonly exitCode: number | null;
  constructor(message: string, exitCode: number | null) {
    super(message);
    this.name = "CliError";
    this.exitCode = exitCode;
  }
}
