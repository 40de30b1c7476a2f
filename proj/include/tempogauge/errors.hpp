#pragma once

#include <stdexcept>
#include <string>

namespace tempogauge {

// Base for every error thrown by the toolkit. Anything deriving from Error is
// a problem with inputs or stored state, not a programming bug; the CLI maps
// these to exit code 1 and everything else to exit code 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed container or stream (bad magic, chunk overruns the byte stream).
struct FormatError : Error {
  using Error::Error;
};

// Well-formed container that encodes something this build does not read
// (compressed WAV, >2 channels, unknown codec tags).
struct UnsupportedFormatError : Error {
  using Error::Error;
};

// Content violates a documented contract: manifest fields, config keys,
// tensor shapes in a weights file.
struct ValidationError : Error {
  using Error::Error;
};

// Input has fewer samples/frames than the operation needs.
struct TooShortError : Error {
  using Error::Error;
};

// Index or offset outside the valid range for the given input.
struct BoundsError : Error {
  using Error::Error;
};

// Tensor arguments whose shapes cannot be combined.
struct ShapeError : Error {
  using Error::Error;
};

// Scalar argument outside its documented domain (bpm, scale factor, rates).
struct DomainError : Error {
  using Error::Error;
};

// Autocorrelation found nothing periodic to estimate a tempo from.
struct NoPeriodicityError : Error {
  using Error::Error;
};

// Inference through a batch-norm layer that never accumulated statistics.
struct UninitializedStatsError : Error {
  using Error::Error;
};

// Weights file written by a different format version than this build reads.
struct VersionError : Error {
  using Error::Error;
};

// Stored bytes fail their checksum or are truncated.
struct CorruptionError : Error {
  using Error::Error;
};

// Filesystem failure (open, read, write, rename).
struct IoError : Error {
  using Error::Error;
};

// Training produced a non-finite loss and cannot continue.
struct DivergedError : Error {
  using Error::Error;
};

}  // namespace tempogauge
