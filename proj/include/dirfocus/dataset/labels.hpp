#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace dirfocus::dataset {

enum class LabelParadigm { Full14, Octal8, Quaternary4, Binary2 };

int class_count(LabelParadigm paradigm);
std::string to_string(LabelParadigm paradigm);
LabelParadigm parse_label_paradigm(std::string_view name);

/// Class index of an attended direction, or nullopt when the paradigm excludes
/// it. Full14: one class per direction in ascending angle order. Octal8: only
/// directions with a front-rear counterpart (+-45/135, +-60/120) are kept.
/// Quaternary4: the Octal8 set by quadrant (left-front, left-rear, right-front,
/// right-rear). Binary2: left (0) / right (1) by sign.
/// Throws ParameterError for a direction outside the fourteen-direction set.
std::optional<int> label_trial(int direction, LabelParadigm paradigm);

/// Human-readable class name, e.g. "-45", "left-rear", "right".
std::string class_name(LabelParadigm paradigm, int label);

}  // namespace dirfocus::dataset
