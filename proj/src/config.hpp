#pragma once

#include <string>

#include "grpo.hpp"
#include "sft.hpp"
#include "synth.hpp"

namespace pgrpo {

// Config documents are JSON objects whose keys mirror the struct fields.
// Missing keys keep their defaults; unknown keys are rejected.
GenConfig gen_config_from_json(const std::string& text);
SftConfig sft_config_from_json(const std::string& text);
TrainConfig train_config_from_json(const std::string& text);

}  // namespace pgrpo
