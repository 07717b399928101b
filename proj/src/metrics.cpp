#include "vqi2i/metrics.hpp"

#include <cstdio>

#include "vqi2i/error.hpp"

namespace vqi2i {

namespace {
void put(std::string& line, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "\t%.17g", v);
    line += buf;
}
}  // namespace

std::string MetricsLog::format_line(const StepReport& r, bool uni) {
    std::string line = std::to_string(r.step);
    put(line, r.loss_d);
    put(line, r.adv);
    put(line, r.recon);
    put(line, r.vq);
    if (!uni) {
        require(r.content.has_value() && r.style.has_value(),
                "metrics line for the full objective needs content and style terms");
        put(line, *r.content);
        put(line, *r.style);
    }
    put(line, r.total_gen);
    put(line, r.usage);
    line += '\n';
    return line;
}

void MetricsLog::open(const std::string& path, bool uni, bool resume) {
    uni_ = uni;
    out_.open(path, resume ? (std::ios::out | std::ios::app) : (std::ios::out | std::ios::trunc));
    if (!out_) failf("cannot open metrics log '%s'", path.c_str());
    out_.seekp(0, std::ios::end);
    if (out_.tellp() == 0) {
        out_ << (uni ? "# step\tloss_d\tadv\trecon\tvq\ttotal\tusage\n"
                     : "# step\tloss_d\tadv\trecon\tvq\tcontent\tstyle\ttotal\tusage\n");
    }
}

void MetricsLog::append(const StepReport& r) {
    require(out_.is_open(), "metrics log is not open");
    out_ << format_line(r, uni_);
    out_.flush();
    if (!out_) fail("failed to append to the metrics log");
}

}  // namespace vqi2i
