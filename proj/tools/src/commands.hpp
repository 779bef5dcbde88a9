#pragma once

#include <vector>

#include "config.hpp"

namespace cotools::cli {

struct Command {
  Schema schema;
  std::string description;
  int (*run)(const RunConfig&);
};

const std::vector<Command>& commands();

}  // namespace cotools::cli
