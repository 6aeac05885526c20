#pragma once

#include <optional>
#include <string>

#include "gda/pipeline/config.hpp"

namespace gda::pipe {

struct StageError : Error {
    StageError(const std::string& stage, const std::string& msg)
        : Error("stage '" + stage + "' failed: " + msg), stage_name(stage) {}
    std::string stage_name;
};

struct RunOptions {
    std::optional<std::string> only_stage; // run one stage, prerequisites must be done
    bool deterministic = false;            // pin to one thread (strict bit-equality mode)
    bool verbose = true;
};

// Stage order: real -> ganzoo -> manifest -> dae -> fen -> classifier -> eval.
// Every stage writes artifacts under out_dir and records a config digest in
// state.json; a completed stage with an unchanged digest is skipped.
void run_pipeline(const ExperimentConfig& cfg, const std::string& out_dir,
                  const RunOptions& opts);

const std::vector<std::string>& stage_names();

// Effective worker count (also applied to Eigen); recorded in the state file
// because bit-exact reproducibility is per thread count.
int apply_thread_config(const ExperimentConfig& cfg, bool deterministic);

} // namespace gda::pipe
