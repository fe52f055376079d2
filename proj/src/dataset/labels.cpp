#include "dirfocus/dataset/labels.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>

#include "dirfocus/dataset/trial.hpp"
#include "dirfocus/error.hpp"

namespace dirfocus::dataset {
namespace {

constexpr std::array<int, 8> kOctalDirections = {-135, -120, -60, -45, 45, 60, 120, 135};
constexpr std::array<const char*, 4> kQuadrants = {"left-front", "left-rear", "right-front", "right-rear"};

}  // namespace

bool is_known_direction(int direction) {
  return std::find(kDirections.begin(), kDirections.end(), direction) != kDirections.end();
}

int class_count(LabelParadigm paradigm) {
  switch (paradigm) {
    case LabelParadigm::Full14: return 14;
    case LabelParadigm::Octal8: return 8;
    case LabelParadigm::Quaternary4: return 4;
    case LabelParadigm::Binary2: return 2;
  }
  throw ParameterError("unknown label paradigm");
}

std::string to_string(LabelParadigm paradigm) {
  switch (paradigm) {
    case LabelParadigm::Full14: return "Full14";
    case LabelParadigm::Octal8: return "Octal8";
    case LabelParadigm::Quaternary4: return "Quaternary4";
    case LabelParadigm::Binary2: return "Binary2";
  }
  throw ParameterError("unknown label paradigm");
}

LabelParadigm parse_label_paradigm(std::string_view name) {
  for (auto p : {LabelParadigm::Full14, LabelParadigm::Octal8, LabelParadigm::Quaternary4, LabelParadigm::Binary2}) {
    if (name == to_string(p)) return p;
  }
  throw ParameterError("unknown label paradigm '" + std::string(name) +
                       "' (expected Full14, Octal8, Quaternary4 or Binary2)");
}

std::optional<int> label_trial(int direction, LabelParadigm paradigm) {
  if (!is_known_direction(direction)) {
    throw ParameterError("direction " + std::to_string(direction) + " is not one of the fourteen azimuths");
  }
  switch (paradigm) {
    case LabelParadigm::Full14:
      return static_cast<int>(std::find(kDirections.begin(), kDirections.end(), direction) - kDirections.begin());
    case LabelParadigm::Octal8: {
      const auto it = std::find(kOctalDirections.begin(), kOctalDirections.end(), direction);
      if (it == kOctalDirections.end()) return std::nullopt;
      return static_cast<int>(it - kOctalDirections.begin());
    }
    case LabelParadigm::Quaternary4: {
      if (std::find(kOctalDirections.begin(), kOctalDirections.end(), direction) == kOctalDirections.end())
        return std::nullopt;
      const bool right = direction > 0;
      const bool rear = std::abs(direction) > 90;
      return (right ? 2 : 0) + (rear ? 1 : 0);
    }
    case LabelParadigm::Binary2:
      return direction > 0 ? 1 : 0;
  }
  throw ParameterError("unknown label paradigm");
}

std::string class_name(LabelParadigm paradigm, int label) {
  if (label < 0 || label >= class_count(paradigm)) throw ParameterError("class index out of range");
  switch (paradigm) {
    case LabelParadigm::Full14: return std::to_string(kDirections[static_cast<std::size_t>(label)]);
    case LabelParadigm::Octal8: return std::to_string(kOctalDirections[static_cast<std::size_t>(label)]);
    case LabelParadigm::Quaternary4: return kQuadrants[static_cast<std::size_t>(label)];
    case LabelParadigm::Binary2: return label == 0 ? "left" : "right";
  }
  throw ParameterError("unknown label paradigm");
}

}  // namespace dirfocus::dataset
