#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gda/core/check.hpp"

namespace gda::data {

enum class Split { train, closed_test, crossseed_test, finetune_test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

inline constexpr const char* kRealClass = "real";

// Ordered class list; element 0 is "real", the rest are architecture
// family ids. Classifier output dimension equals size().
struct LabelSpace {
    std::vector<std::string> classes;

    static LabelSpace for_families(const std::vector<std::string>& families) {
        LabelSpace ls;
        ls.classes.push_back(kRealClass);
        for (const auto& f : families) ls.classes.push_back(f);
        ls.validate();
        return ls;
    }

    void validate() const {
        check(!classes.empty() && classes[0] == kRealClass,
              "label space: class 0 must be 'real'");
        for (size_t i = 0; i < classes.size(); ++i)
            for (size_t j = i + 1; j < classes.size(); ++j)
                check(classes[i] != classes[j], "label space: duplicate class '" + classes[i] + "'");
        for (size_t i = 1; i < classes.size(); ++i)
            check(classes[i] != kRealClass, "label space: more than one 'real' class");
    }

    int size() const { return static_cast<int>(classes.size()); }

    int index_of(const std::string& cls) const {
        for (size_t i = 0; i < classes.size(); ++i)
            if (classes[i] == cls) return static_cast<int>(i);
        fail("label space: unknown class '" + cls + "'");
    }
};

// Full origin record of one image. Images from all seeds of one family are
// clubbed under the family label.
struct Provenance {
    std::string label;
    std::string family;
    std::optional<int> seed;
    int base_epochs = 0;
    int finetune_extra_epochs = 0;
    std::optional<uint64_t> noise_seed;

    bool is_real() const { return label == kRealClass; }

    void validate() const {
        const bool real_label = label == kRealClass;
        const bool real_family = family == kRealClass;
        check(real_label == real_family, "provenance: family='real' iff label='real'");
        check(real_label == !seed.has_value(), "provenance: seed absent iff real");
        check(real_label == !noise_seed.has_value(), "provenance: noise_seed absent iff real");
        check(finetune_extra_epochs >= 0, "provenance: negative finetune_extra_epochs");
        if (!real_label) check(label == family, "provenance: fake label must equal family (clubbing)");
    }
};

} // namespace gda::data
