#include "aabcos/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace aabcos {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

std::int64_t parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        std::int64_t i = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    }
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("config key '" + key + "': expected 0/1, got '" + v + "'");
}

std::vector<double> parse_double_list(const std::string& v, const std::string& key) {
    std::vector<double> out;
    std::string cur;
    for (char c : v) {
        if (c == ';' || c == ',') {
            if (!cur.empty()) out.push_back(parse_double(cur, key));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(parse_double(cur, key));
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
    RunConfig rc;
    std::istringstream in(text);
    std::string line;
    std::int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value, got '" + t + "'");
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));

        if (key == "input_size") rc.model.input_size = parse_int(val, key);
        else if (key == "in_channels") rc.model.in_channels = parse_int(val, key);
        else if (key == "input_encoding") rc.model.input_encoding = parse_bool(val, key);
        else if (key == "num_classes") rc.model.num_classes = parse_int(val, key);
        else if (key == "widths") {
            rc.model.widths.clear();
            for (double w : parse_double_list(val, key)) rc.model.widths.push_back(static_cast<std::int64_t>(w));
        }
        else if (key == "kernel") rc.model.kernel = parse_int(val, key);
        else if (key == "B") rc.model.B = parse_double(val, key);
        else if (key == "maxout_group") rc.model.maxout_group = parse_int(val, key);
        else if (key == "norm_epsilon") rc.model.norm_epsilon = parse_double(val, key);
        else if (key == "logit_scale") rc.model.logit_scale = parse_double(val, key);
        else if (key == "pool") rc.model.pool.kind = pool_kind_from(val);
        else if (key == "pool_stride") rc.model.pool.stride = parse_int(val, key);
        else if (key == "mode") rc.model.mode = class_mode_from(val);
        else if (key == "epochs") rc.train.epochs = static_cast<int>(parse_int(val, key));
        else if (key == "batch_size") rc.train.batch_size = static_cast<int>(parse_int(val, key));
        else if (key == "lr") rc.train.lr = parse_double(val, key);
        else if (key == "weight_decay") rc.train.weight_decay = parse_double(val, key);
        else if (key == "scheduler_patience") rc.train.scheduler_patience = static_cast<int>(parse_int(val, key));
        else if (key == "scheduler_factor") rc.train.scheduler_factor = parse_double(val, key);
        else if (key == "loss") rc.train.loss = loss_kind_from(val);
        else if (key == "seed") rc.train.seed = static_cast<std::uint64_t>(parse_int(val, key));
        else if (key == "augment") rc.train.augment = augment_kind_from(val);
        else if (key == "oversample") rc.train.oversample_train = parse_bool(val, key);
        else if (key == "translate_px") rc.train.aug.translate_px = parse_double(val, key);
        else if (key == "scale_sigma") rc.train.aug.scale_sigma = parse_double(val, key);
        else if (key == "rotate_deg") rc.train.aug.rotate_deg = parse_double(val, key);
        else if (key == "shear_deg") rc.train.aug.shear_deg = parse_double(val, key);
        else if (key == "perspective") rc.train.aug.perspective = parse_double(val, key);
        else if (key == "perspective_prob") rc.train.aug.perspective_prob = parse_double(val, key);
        else if (key == "gamma_sigma") rc.train.aug.gamma_sigma = parse_double(val, key);
        else if (key == "heavy_scale_sigma") rc.train.aug.heavy_scale_sigma = parse_double(val, key);
        else if (key == "heavy_gamma_sigma") rc.train.aug.heavy_gamma_sigma = parse_double(val, key);
        else if (key == "blur_prob") rc.train.aug.blur_prob = parse_double(val, key);
        else if (key == "blur_sigma") rc.train.aug.blur_sigma = parse_double(val, key);
        else if (key == "noise_prob") rc.train.aug.noise_prob = parse_double(val, key);
        else if (key == "noise_sigma") rc.train.aug.noise_sigma = parse_double(val, key);
        else if (key == "saltpepper_prob") rc.train.aug.saltpepper_prob = parse_double(val, key);
        else if (key == "saltpepper_density") rc.train.aug.saltpepper_density = parse_double(val, key);
        else if (key == "thresholds") rc.epg.thresholds = parse_double_list(val, key);
        else
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown config key '" + key + "'");
    }
    rc.model.validate();
    rc.train.validate(rc.model.mode);
    rc.epg.validate();
    return rc;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::string RunConfig::resolved_text() const {
    std::ostringstream out;
    out << "# resolved configuration\n";
    out << "input_size=" << model.input_size << "\n";
    out << "in_channels=" << model.in_channels << "\n";
    out << "input_encoding=" << (model.input_encoding ? 1 : 0) << "\n";
    out << "num_classes=" << model.num_classes << "\n";
    out << "widths=";
    for (std::size_t i = 0; i < model.widths.size(); ++i) out << (i ? ";" : "") << model.widths[i];
    out << "\n";
    out << "kernel=" << model.kernel << "\n";
    out << "B=" << fmt(model.B) << "\n";
    out << "maxout_group=" << model.maxout_group << "\n";
    out << "norm_epsilon=" << fmt(model.norm_epsilon) << "\n";
    out << "logit_scale=" << fmt(model.logit_scale) << "\n";
    out << "pool=" << pool_kind_name(model.pool.kind) << "\n";
    out << "pool_stride=" << model.pool.stride << "\n";
    out << "mode=" << class_mode_name(model.mode) << "\n";
    out << "epochs=" << train.epochs << "\n";
    out << "batch_size=" << train.batch_size << "\n";
    out << "lr=" << fmt(train.lr) << "\n";
    out << "weight_decay=" << fmt(train.weight_decay) << "\n";
    out << "scheduler_patience=" << train.scheduler_patience << "\n";
    out << "scheduler_factor=" << fmt(train.scheduler_factor) << "\n";
    out << "loss=" << loss_kind_name(train.loss) << "\n";
    out << "seed=" << train.seed << "\n";
    out << "augment=" << augment_kind_name(train.augment) << "\n";
    out << "oversample=" << (train.oversample_train ? 1 : 0) << "\n";
    out << "translate_px=" << fmt(train.aug.translate_px) << "\n";
    out << "scale_sigma=" << fmt(train.aug.scale_sigma) << "\n";
    out << "rotate_deg=" << fmt(train.aug.rotate_deg) << "\n";
    out << "shear_deg=" << fmt(train.aug.shear_deg) << "\n";
    out << "perspective=" << fmt(train.aug.perspective) << "\n";
    out << "perspective_prob=" << fmt(train.aug.perspective_prob) << "\n";
    out << "gamma_sigma=" << fmt(train.aug.gamma_sigma) << "\n";
    out << "heavy_scale_sigma=" << fmt(train.aug.heavy_scale_sigma) << "\n";
    out << "heavy_gamma_sigma=" << fmt(train.aug.heavy_gamma_sigma) << "\n";
    out << "blur_prob=" << fmt(train.aug.blur_prob) << "\n";
    out << "blur_sigma=" << fmt(train.aug.blur_sigma) << "\n";
    out << "noise_prob=" << fmt(train.aug.noise_prob) << "\n";
    out << "noise_sigma=" << fmt(train.aug.noise_sigma) << "\n";
    out << "saltpepper_prob=" << fmt(train.aug.saltpepper_prob) << "\n";
    out << "saltpepper_density=" << fmt(train.aug.saltpepper_density) << "\n";
    out << "thresholds=";
    for (std::size_t i = 0; i < epg.thresholds.size(); ++i) out << (i ? ";" : "") << fmt(epg.thresholds[i]);
    out << "\n";
    return out.str();
}

void RunConfig::write_resolved(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << resolved_text();
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

}  // namespace aabcos
