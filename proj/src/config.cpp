#include "vqi2i/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vqi2i/error.hpp"

namespace vqi2i {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void parse_fail(const std::string& origin, int line, const std::string& what) {
    failf("%s:%d: %s", origin.c_str(), line, what.c_str());
}

int64_t to_int(const std::string& v, const std::string& origin, int line) {
    try {
        size_t used = 0;
        int64_t x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        parse_fail(origin, line, "expected an integer, got '" + v + "'");
    }
}

uint64_t to_u64(const std::string& v, const std::string& origin, int line) {
    try {
        size_t used = 0;
        if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
        uint64_t x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        parse_fail(origin, line, "expected an unsigned 64-bit integer, got '" + v + "'");
    }
}

double to_double(const std::string& v, const std::string& origin, int line) {
    try {
        size_t used = 0;
        double x = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        parse_fail(origin, line, "expected a finite number, got '" + v + "'");
    }
}

bool to_bool(const std::string& v, const std::string& origin, int line) {
    if (v == "0" || v == "false") return false;
    if (v == "1" || v == "true") return true;
    parse_fail(origin, line, "expected 0/1/true/false, got '" + v + "'");
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void Config::finalize() {
    lm.vocab = net.codebook_size;
    net.validate();
    weights.validate();
    lm.validate();
    require(sampler.temperature > 0.0 && std::isfinite(sampler.temperature),
            "sampler temperature must be positive");
    require(sampler.top_k >= 1, "sampler top_k must be >= 1");
    require(optim.lr > 0.0 && std::isfinite(optim.lr), "optim.lr must be positive");
    require(optim.beta1 >= 0.0 && optim.beta1 < 1.0, "optim.beta1 must be in [0, 1)");
    require(optim.beta2 >= 0.0 && optim.beta2 < 1.0, "optim.beta2 must be in [0, 1)");
    require(optim.eps > 0.0, "optim.eps must be positive");
    require(train.steps >= 0 && train.lm_steps >= 0, "step counts must be nonnegative");
    require(train.batch >= 1 && train.lm_batch >= 1, "batch sizes must be >= 1");
    require(train.lm_lr > 0.0 && std::isfinite(train.lm_lr), "train.lm_lr must be positive");
    require(train.log_every >= 1, "train.log_every must be >= 1");
    require(data.toy_count >= 0, "data.toy_count must be nonnegative");
}

Config default_config() {
    Config c;
    c.finalize();
    return c;
}

Config parse_config_text(const std::string& text, const std::string& origin) {
    Config c;
    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        size_t hash = raw.find_first_of("#;");
        std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') parse_fail(origin, line, "unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (section != "net" && section != "codebook" && section != "loss" &&
                section != "lm" && section != "optim" && section != "train" && section != "data")
                parse_fail(origin, line, "unknown section '" + section + "'");
            continue;
        }
        size_t eq = s.find('=');
        if (eq == std::string::npos) parse_fail(origin, line, "expected 'key = value'");
        std::string key = trim(s.substr(0, eq));
        std::string val = trim(s.substr(eq + 1));
        if (key.empty()) parse_fail(origin, line, "empty key");
        if (section.empty()) parse_fail(origin, line, "key '" + key + "' before any section");

        auto num = [&] { return to_double(val, origin, line); };
        auto iv = [&] { return static_cast<int>(to_int(val, origin, line)); };
        bool known = true;
        if (section == "net") {
            if (key == "image_size") c.net.image_size = iv();
            else if (key == "base_channels") c.net.base_channels = iv();
            else if (key == "downsample_factor") c.net.downsample_factor = iv();
            else if (key == "style_dim") c.net.style_dim = iv();
            else if (key == "num_adain_blocks") c.net.num_adain_blocks = iv();
            else if (key == "disc_depth") c.net.disc_depth = iv();
            else known = false;
        } else if (section == "codebook") {
            if (key == "size") c.net.codebook_size = iv();
            else if (key == "dim") c.net.code_dim = iv();
            else known = false;
        } else if (section == "loss") {
            if (key == "adv") c.weights.adv = num();
            else if (key == "recon") c.weights.recon = num();
            else if (key == "vq") c.weights.vq = num();
            else if (key == "content") c.weights.content = num();
            else if (key == "style") c.weights.style = num();
            else if (key == "nonsaturating") c.weights.nonsaturating = to_bool(val, origin, line);
            else known = false;
        } else if (section == "lm") {
            if (key == "context") c.lm.context = iv();
            else if (key == "layers") c.lm.layers = iv();
            else if (key == "heads") c.lm.heads = iv();
            else if (key == "width") c.lm.width = iv();
            else if (key == "window") c.lm.window = iv();
            else if (key == "temperature") c.sampler.temperature = num();
            else if (key == "top_k") c.sampler.top_k = iv();
            else known = false;
        } else if (section == "optim") {
            if (key == "lr") c.optim.lr = num();
            else if (key == "beta1") c.optim.beta1 = num();
            else if (key == "beta2") c.optim.beta2 = num();
            else if (key == "eps") c.optim.eps = num();
            else known = false;
        } else if (section == "train") {
            if (key == "seed") c.train.seed = to_u64(val, origin, line);
            else if (key == "steps") c.train.steps = iv();
            else if (key == "batch") c.train.batch = iv();
            else if (key == "lm_steps") c.train.lm_steps = iv();
            else if (key == "lm_batch") c.train.lm_batch = iv();
            else if (key == "lm_lr") c.train.lm_lr = num();
            else if (key == "log_every") c.train.log_every = iv();
            else if (key == "metrics") c.train.metrics = val;
            else if (key == "uni") c.train.uni = to_bool(val, origin, line);
            else known = false;
        } else if (section == "data") {
            if (key == "dir_x") c.data.dir_x = val;
            else if (key == "dir_y") c.data.dir_y = val;
            else if (key == "toy_count") c.data.toy_count = iv();
            else known = false;
        }
        if (!known) parse_fail(origin, line, "unknown key '" + key + "' in [" + section + "]");
    }
    c.finalize();
    return c;
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) failf("cannot open config file '%s'", path.c_str());
    std::stringstream ss;
    ss << in.rdbuf();
    Config c = parse_config_text(ss.str(), path);
    if (const char* env = std::getenv("VQI2I_SEED")) {
        c.train.seed = to_u64(trim(env), "VQI2I_SEED", 1);
        c.finalize();
    }
    return c;
}

std::string serialize_config(const Config& c) {
    std::ostringstream out;
    out << "[net]\n";
    out << "image_size = " << c.net.image_size << "\n";
    out << "base_channels = " << c.net.base_channels << "\n";
    out << "downsample_factor = " << c.net.downsample_factor << "\n";
    out << "style_dim = " << c.net.style_dim << "\n";
    out << "num_adain_blocks = " << c.net.num_adain_blocks << "\n";
    out << "disc_depth = " << c.net.disc_depth << "\n";
    out << "\n[codebook]\n";
    out << "size = " << c.net.codebook_size << "\n";
    out << "dim = " << c.net.code_dim << "\n";
    out << "\n[loss]\n";
    out << "adv = " << fmt_double(c.weights.adv) << "\n";
    out << "recon = " << fmt_double(c.weights.recon) << "\n";
    out << "vq = " << fmt_double(c.weights.vq) << "\n";
    out << "content = " << fmt_double(c.weights.content) << "\n";
    out << "style = " << fmt_double(c.weights.style) << "\n";
    out << "nonsaturating = " << (c.weights.nonsaturating ? 1 : 0) << "\n";
    out << "\n[lm]\n";
    out << "context = " << c.lm.context << "\n";
    out << "layers = " << c.lm.layers << "\n";
    out << "heads = " << c.lm.heads << "\n";
    out << "width = " << c.lm.width << "\n";
    out << "window = " << c.lm.window << "\n";
    out << "temperature = " << fmt_double(c.sampler.temperature) << "\n";
    out << "top_k = " << c.sampler.top_k << "\n";
    out << "\n[optim]\n";
    out << "lr = " << fmt_double(c.optim.lr) << "\n";
    out << "beta1 = " << fmt_double(c.optim.beta1) << "\n";
    out << "beta2 = " << fmt_double(c.optim.beta2) << "\n";
    out << "eps = " << fmt_double(c.optim.eps) << "\n";
    out << "\n[train]\n";
    out << "seed = " << c.train.seed << "\n";
    out << "steps = " << c.train.steps << "\n";
    out << "batch = " << c.train.batch << "\n";
    out << "lm_steps = " << c.train.lm_steps << "\n";
    out << "lm_batch = " << c.train.lm_batch << "\n";
    out << "lm_lr = " << fmt_double(c.train.lm_lr) << "\n";
    out << "log_every = " << c.train.log_every << "\n";
    out << "metrics = " << c.train.metrics << "\n";
    out << "uni = " << (c.train.uni ? 1 : 0) << "\n";
    out << "\n[data]\n";
    out << "dir_x = " << c.data.dir_x << "\n";
    out << "dir_y = " << c.data.dir_y << "\n";
    out << "toy_count = " << c.data.toy_count << "\n";
    return out.str();
}

}  // namespace vqi2i
