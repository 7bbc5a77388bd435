#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace co4::macs {

// Closed-form dominant multiply-accumulate models. Bias additions and
// elementwise work are excluded by convention; the latter is reported
// separately as the alpha term.
long long macs_standard(int tokens, int embed_dim, int layers);
long long macs_co4(int tokens, int embed_dim, int layers, int latents);

// ---- instrumentation -------------------------------------------------------
// Counters are per-run accumulators. Ops report into the current tag scope;
// untagged work lands in "other".

void set_enabled(bool on);
bool enabled();
void reset();

void count_matmul(long long m, long long k, long long n);
void count_elementwise(const std::string& kind, long long n);

// Current accumulator values (0 when the tag/kind has not been seen).
long long matmul_total();
long long elementwise_count(const std::string& kind);

struct ScopedTag {
  explicit ScopedTag(const char* tag);
  ~ScopedTag();
  ScopedTag(const ScopedTag&) = delete;
  ScopedTag& operator=(const ScopedTag&) = delete;

 private:
  const char* prev_;
};

struct TermCount {
  long long expected = 0;
  long long measured = 0;
};

struct MacReport {
  std::string arch;  // "standard" | "co4"
  int tokens = 0;
  int embed_dim = 0;
  int layers = 0;
  int latents = 0;
  long long closed_form = 0;  // dominant-term approximation
  bool has_measurement = false;
  long long measured = 0;           // total matmul MACs actually executed
  long long elementwise_extra = 0;  // alpha: modulation + softmax + layer norm
  std::map<std::string, TermCount> breakdown;        // matmul terms
  std::map<std::string, long long> elementwise;      // alpha itemization
  std::string to_json(int indent = 2) const;
};

// Closed-form-only report (no forward pass).
MacReport report(const std::string& arch, int tokens, int embed_dim,
                 int layers, int latents);

// Builds the layer stack, runs one forward pass under instrumentation and
// returns the tagged counts next to their exact expected values. Throws if
// instrumentation is disabled.
MacReport measure(const std::string& arch, int tokens, int embed_dim,
                  int layers, int latents, unsigned long long seed = 7);

}  // namespace co4::macs
