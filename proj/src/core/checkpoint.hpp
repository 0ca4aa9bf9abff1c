#pragma once

#include <string>

#include "core/fusion.hpp"

namespace msa::fusion {

std::string model_to_string(const Model& model);
Model model_from_string(const std::string& text, const std::string& origin);
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace msa::fusion
