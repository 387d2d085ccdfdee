#pragma once

#include <stdexcept>
#include <string>

namespace gwer {

enum class Errc {
  NegativeProbability,
  ZeroOffspringMass,
  NotNormalized,
  SubcriticalMean,
  InvalidSupport,
  ParseError,
  ArenaOverflow,
  NotFrontier,
  InsufficientDepth,
  DomainError,
  NoConvergence,
  SingularSystem,
  BufferTooSmall,
  PathTooShort,
  TooFewSamples,
  NotAdjacent,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::NegativeProbability: return "NegativeProbability";
    case Errc::ZeroOffspringMass: return "ZeroOffspringMass";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::SubcriticalMean: return "SubcriticalMean";
    case Errc::InvalidSupport: return "InvalidSupport";
    case Errc::ParseError: return "ParseError";
    case Errc::ArenaOverflow: return "ArenaOverflow";
    case Errc::NotFrontier: return "NotFrontier";
    case Errc::InsufficientDepth: return "InsufficientDepth";
    case Errc::DomainError: return "DomainError";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::BufferTooSmall: return "BufferTooSmall";
    case Errc::PathTooShort: return "PathTooShort";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::NotAdjacent: return "NotAdjacent";
  }
  return "UnknownError";
}

}  // namespace gwer
