#pragma once

#include <stdexcept>
#include <string>

namespace phigrade {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent configuration documents (taxonomy, rule pack,
// exemplars, provider list).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File-level ingestion and serialization problems.
class IoError : public Error {
 public:
  using Error::Error;
};

// Metric preconditions that leave a quantity undefined (e.g. no gold triples
// anywhere in the corpus).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace phigrade
