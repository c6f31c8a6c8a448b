#pragma once

#include "dustat/learners.hpp"

#include <ostream>
#include <string>

namespace dustat::cli {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kNumerical = 4 };

/// Parses "ridge", "lasso", "lasso-theory", "rf" or "fixed:<value>".
LearnerSpec parse_learner(const std::string& text);

/// Runs one command; all output goes to the given streams.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dustat::cli
