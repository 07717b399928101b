#pragma once

#include <fstream>
#include <string>

#include "vqi2i/objectives.hpp"

namespace vqi2i {

// Append-only tab-separated StepReport log, one step per line, doubles
// printed with %.17g so reruns can be compared with a plain diff.
class MetricsLog {
public:
    MetricsLog() = default;

    // `uni` drops the content/style columns. With resume=false the file is
    // recreated; with resume=true new lines append after the existing ones.
    void open(const std::string& path, bool uni, bool resume);
    bool is_open() const { return out_.is_open(); }
    void append(const StepReport& r);

    static std::string format_line(const StepReport& r, bool uni);

private:
    std::ofstream out_;
    bool uni_ = false;
};

}  // namespace vqi2i
