#pragma once

#include <string_view>

// Shipped data assets, embedded at build time from the assets/ tree.
namespace vista::assets {

extern const std::string_view kTaxonomyJson;

extern const std::string_view kStandardInference;
extern const std::string_view kVisualAnchoring;
extern const std::string_view kVisualAnchoringPlain;
extern const std::string_view kEvidenceDeduction;
extern const std::string_view kEvidenceDeductionPlain;
extern const std::string_view kRefinedResponse;
extern const std::string_view kNaiveVerify;
extern const std::string_view kFactExtractionPrompt;

}  // namespace vista::assets
