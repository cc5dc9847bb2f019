#include "flowsift/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace flowsift::config {

void PipelineConfig::validate() const {
    auto fail = [](const std::string& what) {
        throw Error("config: " + what);
    };
    if (flows.n < 1) fail("flows.n must be >= 1");
    if (flows.max_len < 1) fail("flows.max_len must be >= 1");
    if (ae_spec.V < 1 || ae_spec.H < 1 || ae_spec.B < 1)
        fail("autoencoder V/H/B must be >= 1");
    if (ae_train.epochs < 0 || ae_train.batch < 1) fail("autoencoder epochs/batch invalid");
    if (density.K < 1) fail("density.K must be >= 1");
    if (density.hidden_mult < 1) fail("density.hidden_mult must be >= 1");
    if (!(relabel.alpha > 0.0 && relabel.alpha < 1.0))
        fail("relabel.alpha out of (0,1)");
    for (double p : {augment.gamma_pct, augment.omega1_pct, augment.omega2_pct,
                     augment.omega3_pct})
        if (!(p > 0.0 && p < 1.0)) fail("augment percentile out of (0,1)");
    if (!(augment.omega1_pct < augment.omega2_pct &&
          augment.omega2_pct < augment.omega3_pct))
        fail("augment omega percentiles must be increasing");
    if (augment.eta < 1) fail("augment.eta must be >= 1");
    if (augment.per_region < 0) fail("augment.per_region must be >= 0");
    if (!(detector.schedule.rate >= 0.0 && detector.schedule.rate < 1.0))
        fail("detector.forget_rate out of [0,1)");
    if (bench.normal_templates < 1 || bench.malicious_templates < 1)
        fail("bench template counts must be >= 1");
    if (bench.normal_jitter < 0 || bench.malicious_jitter < 0)
        fail("bench jitter must be >= 0");
}

namespace {

struct Binding {
    std::function<void(PipelineConfig&, const std::string&)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

template <typename T>
T parse_value(const std::string& s);

template <>
long parse_value<long>(const std::string& s) {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw Error("not an integer");
    return v;
}
template <>
int parse_value<int>(const std::string& s) {
    return static_cast<int>(parse_value<long>(s));
}
template <>
double parse_value<double>(const std::string& s) {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw Error("not a number");
    return v;
}

template <typename T>
std::string render(T v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

template <typename T>
Binding make_binding(std::function<T&(PipelineConfig&)> access) {
    return Binding{
        [access](PipelineConfig& c, const std::string& s) {
            access(c) = parse_value<T>(s);
        },
        [access](const PipelineConfig& c) {
            return render(access(const_cast<PipelineConfig&>(c)));
        }};
}

const std::map<std::string, Binding>& bindings() {
    static const std::map<std::string, Binding> table = [] {
        std::map<std::string, Binding> t;
        auto add = [&](const std::string& key, auto accessor) {
            using T = std::remove_reference_t<decltype(accessor(
                std::declval<PipelineConfig&>()))>;
            t[key] = make_binding<T>(accessor);
        };
        add("flows.n", [](PipelineConfig& c) -> int& { return c.flows.n; });
        add("flows.max_len", [](PipelineConfig& c) -> long& { return c.flows.max_len; });
        add("autoencoder.V", [](PipelineConfig& c) -> int& { return c.ae_spec.V; });
        add("autoencoder.H", [](PipelineConfig& c) -> int& { return c.ae_spec.H; });
        add("autoencoder.B", [](PipelineConfig& c) -> int& { return c.ae_spec.B; });
        add("autoencoder.epochs", [](PipelineConfig& c) -> int& { return c.ae_train.epochs; });
        add("autoencoder.batch", [](PipelineConfig& c) -> int& { return c.ae_train.batch; });
        add("autoencoder.lr", [](PipelineConfig& c) -> double& { return c.ae_train.lr; });
        add("density.K", [](PipelineConfig& c) -> int& { return c.density.K; });
        add("density.hidden_mult", [](PipelineConfig& c) -> int& { return c.density.hidden_mult; });
        add("density.epochs", [](PipelineConfig& c) -> int& { return c.density.epochs; });
        add("density.batch", [](PipelineConfig& c) -> int& { return c.density.batch; });
        add("density.lr", [](PipelineConfig& c) -> double& { return c.density.lr; });
        add("relabel.alpha", [](PipelineConfig& c) -> double& { return c.relabel.alpha; });
        add("augment.gamma_pct", [](PipelineConfig& c) -> double& { return c.augment.gamma_pct; });
        add("augment.omega1_pct", [](PipelineConfig& c) -> double& { return c.augment.omega1_pct; });
        add("augment.omega2_pct", [](PipelineConfig& c) -> double& { return c.augment.omega2_pct; });
        add("augment.omega3_pct", [](PipelineConfig& c) -> double& { return c.augment.omega3_pct; });
        add("augment.eta", [](PipelineConfig& c) -> int& { return c.augment.eta; });
        add("augment.per_region", [](PipelineConfig& c) -> int& { return c.augment.per_region; });
        add("augment.latent", [](PipelineConfig& c) -> int& { return c.augment.gan.latent; });
        add("augment.steps", [](PipelineConfig& c) -> int& { return c.augment.gan.steps; });
        add("augment.batch", [](PipelineConfig& c) -> int& { return c.augment.gan.batch; });
        add("augment.lr", [](PipelineConfig& c) -> double& { return c.augment.gan.lr; });
        add("detector.epochs", [](PipelineConfig& c) -> int& { return c.detector.epochs; });
        add("detector.batch", [](PipelineConfig& c) -> int& { return c.detector.batch; });
        add("detector.lr", [](PipelineConfig& c) -> double& { return c.detector.lr; });
        add("detector.forget_rate", [](PipelineConfig& c) -> double& { return c.detector.schedule.rate; });
        add("detector.ramp", [](PipelineConfig& c) -> int& { return c.detector.schedule.ramp; });
        add("bench.normal_templates", [](PipelineConfig& c) -> int& { return c.bench.normal_templates; });
        add("bench.malicious_templates", [](PipelineConfig& c) -> int& { return c.bench.malicious_templates; });
        add("bench.drifted_templates", [](PipelineConfig& c) -> int& { return c.bench.drifted_templates; });
        add("bench.normal_jitter", [](PipelineConfig& c) -> long& { return c.bench.normal_jitter; });
        add("bench.malicious_jitter", [](PipelineConfig& c) -> long& { return c.bench.malicious_jitter; });
        add("bench.test_normal", [](PipelineConfig& c) -> int& { return c.bench.test_normal; });
        add("bench.test_malicious", [](PipelineConfig& c) -> int& { return c.bench.test_malicious; });
        return t;
    }();
    return table;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

PipelineConfig parse_config_text(const std::string& text) {
    PipelineConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw Error("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        std::string full = section.empty() ? key : section + "." + key;
        auto it = bindings().find(full);
        if (it == bindings().end())
            throw Error("config: unknown key '" + key + "' in section [" + section + "]");
        try {
            it->second.set(cfg, value);
        } catch (const std::exception& e) {
            throw Error("config: bad value for '" + key + "' in section [" + section +
                        "]: " + e.what());
        }
    }
    // L always follows max_len; n mirrors the flows section.
    cfg.ae_spec.L = static_cast<int>(cfg.flows.max_len) + 1;
    cfg.ae_spec.n = cfg.flows.n;
    cfg.validate();
    return cfg;
}

PipelineConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize(const PipelineConfig& cfg) {
    std::ostringstream out;
    std::string last_section;
    for (const auto& [full, binding] : bindings()) {
        auto dot = full.find('.');
        std::string section = full.substr(0, dot);
        std::string key = full.substr(dot + 1);
        if (section != last_section) {
            if (!last_section.empty()) out << '\n';
            out << '[' << section << "]\n";
            last_section = section;
        }
        out << key << " = " << binding.get(cfg) << '\n';
    }
    return out.str();
}

std::uint64_t config_hash(const PipelineConfig& cfg) {
    return fnv1a(serialize(cfg));
}

}  // namespace flowsift::config
