#pragma once

#include "vista/backend.hpp"
#include "vista/chat.hpp"

#include <map>
#include <string>
#include <vector>

namespace vista {

struct ProbeStep {
    int step_id = 0;
    std::string visual_fact;
    std::string binary_probe;
    bool answer_yes = true;
};

/// One decomposed reasoning chain of atomic visual facts for an item.
struct ProbeChain {
    std::string item_id;
    std::vector<ProbeStep> reasoning_chain;  // 3..6 steps, ids consecutive from 1
    std::string sufficiency_check;

    void validate() const;
};

/// JSON-lines: {"item_id", "reasoning_chain": [{"step_id", "visual_fact",
/// "binary_probe", "probe_answer"}], "sufficiency_check"}.
std::vector<ProbeChain> parse_probe_chains(const std::string& text);
std::vector<ProbeChain> load_probe_chains(const std::string& path);

struct ProbeTaskResult {
    long long a_correct = 0, a_total = 0;
    long long b_correct = 0, b_total = 0;
    long long c_correct = 0, c_total = 0;

    double acc_a() const { return a_total == 0 ? 0.0 : double(a_correct) / double(a_total); }
    double acc_b() const { return b_total == 0 ? 0.0 : double(b_correct) / double(b_total); }
    double acc_c() const { return c_total == 0 ? 0.0 : double(c_correct) / double(c_total); }
};

/// Task A: standard end-to-end answering of each chain's item.
/// Task B: Yes/No accuracy over every probe, frames attached.
/// Task C: the chain's item re-asked with its Task-B-verified facts injected
/// as text and visual input bypassed entirely.
ProbeTaskResult run_probe_tasks(const std::vector<ProbeChain>& chains,
                                const std::vector<MCQItem>& items, Backend& backend);

/// Text-only transcript for Task C (contains no media segments by contract).
ChatTranscript render_fact_injected(const MCQItem& item, const std::vector<std::string>& facts);

struct ChiSquareResult {
    double statistic = 0.0;
    bool p_below_001 = false;
    /// Either expected cell is below 5, where the test is unreliable.
    bool low_expected_warning = false;
};

/// One-degree-of-freedom goodness-of-fit over (match, non-match) cells with
/// expected counts (n*p0, n*(1-p0)); significance checked against the
/// df=1, alpha=0.001 critical value 10.828.
ChiSquareResult chi_square_uniform(long long matches, long long n, double p0);

struct BlindConsistencyOptions {
    int resolution = 384;   // black frame edge length
    double p0 = 0.25;       // chance agreement for 4-option items
    std::string work_dir;   // black frame location; empty uses the temp dir
};

struct BlindConsistencyReport {
    long long n = 0;        // items with a parseable blind answer
    long long matches = 0;  // blind choice identical to the original error
    long long excluded = 0; // unparseable blind answers, removed from n
    double consistency_rate = 0.0;
    double chi_square = 0.0;
    bool p_below_001 = false;
    bool low_expected_warning = false;
};

/// Re-answers each item with its frames replaced by solid black images and
/// measures agreement with the originally recorded (failed) choices.
BlindConsistencyReport run_blind_consistency(const std::vector<MCQItem>& items,
                                             const std::map<std::string, char>& original_choices,
                                             Backend& backend,
                                             const BlindConsistencyOptions& options = {});

/// Writes a solid-black 8-bit grayscale PNG.
void write_black_png(const std::string& path, int width, int height);

/// The offline chain-generation prompt with question/gold substituted;
/// generation itself happens outside this tool.
std::string fact_extraction_prompt(const MCQItem& item);

}  // namespace vista
