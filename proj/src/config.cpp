#include <ccm/config.hpp>
#include <ccm/error.hpp>
#include <ccm/io.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace ccm {

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string unquote(std::string s)
{
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) return s.substr(1, s.size() - 2);
    return s;
}

// "[a, b]" or "a, b" -> {"a", "b"}
std::vector<std::string> list_items(std::string_view value)
{
    std::string v = trim(value);
    if (!v.empty() && v.front() == '[') {
        if (v.back() != ']') throw InputError("unterminated list '" + v + "'");
        v = v.substr(1, v.size() - 2);
    }
    std::vector<std::string> out;
    std::istringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = unquote(trim(item));
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double number(std::string_view key, std::string_view value)
{
    const double v = io::parse_number(unquote(trim(value)), key);
    if (!std::isfinite(v)) throw InputError(std::string(key) + " must be a finite number");
    return v;
}

int integer(std::string_view key, std::string_view value)
{
    const double v = number(key, value);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw InputError(std::string(key) + " must be an integer");
    return static_cast<int>(v);
}

bool boolean(std::string_view key, std::string_view value)
{
    const std::string v = unquote(trim(value));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw InputError(std::string(key) + " must be true or false");
}

std::vector<int> int_list(std::string_view key, std::string_view value)
{
    std::vector<int> out;
    for (const auto& item : list_items(value)) out.push_back(integer(key, item));
    return out;
}

std::string join_numbers(const std::vector<double>& v)
{
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + io::format_number(v[i]);
    return out + "]";
}

std::string join_ints(const std::vector<int>& v)
{
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
    return out + "]";
}

} // namespace

RunConfig::RunConfig()
{
    for (SchemeKind k : all_schemes()) schemes.push_back(default_scheme(k));
}

void RunConfig::set(std::string_view key_in, std::string_view value)
{
    const std::string key = trim(key_in);
    if (key == "mesh.sigma_mm") meshing.sigma_mm = number(key, value);
    else if (key == "mesh.iso") meshing.iso = number(key, value);
    else if (key == "mesh.max_area_mm2") meshing.max_area_mm2 = number(key, value);
    else if (key == "mesh.min_angle_deg") meshing.min_angle_deg = number(key, value);
    else if (key == "thickness.samples") samples = integer(key, value);
    else if (key == "endpoints.along_offset_mm") endpoints.along_offset_mm = number(key, value);
    else if (key == "endpoints.normal_offset_mm") endpoints.normal_offset_mm = number(key, value);
    else if (key == "slab.width_mm") slab_width_mm = number(key, value);
    else if (key == "slab.spacing_mm") slab_spacing_mm = number(key, value);
    else if (key == "labels.cc") cc_labels = int_list(key, value);
    else if (key == "labels.registration") registration_labels = int_list(key, value);
    else if (key == "subseg.schemes") {
        std::vector<SubsegScheme> next;
        for (const auto& name : list_items(value)) {
            const SchemeKind kind = scheme_from_string(name);
            const auto it = std::find_if(schemes.begin(), schemes.end(), [&](const SubsegScheme& s) { return s.kind == kind; });
            next.push_back(it != schemes.end() ? *it : default_scheme(kind));
        }
        schemes = std::move(next);
    } else if (key.rfind("subseg.fractions.", 0) == 0) {
        const SchemeKind kind = scheme_from_string(key.substr(17));
        std::vector<double> fr;
        for (const auto& item : list_items(value)) fr.push_back(number(key, item));
        auto it = std::find_if(schemes.begin(), schemes.end(), [&](const SubsegScheme& s) { return s.kind == kind; });
        if (it == schemes.end()) {
            schemes.push_back({kind, fr});
        } else {
            it->fractions = fr;
        }
    } else if (key == "eval.hd95_mode") {
        const std::string v = unquote(trim(value));
        if (v == "pooled") hd95_mode = HausdorffMode::pooled;
        else if (v == "max_directed") hd95_mode = HausdorffMode::max_directed;
        else throw InputError("eval.hd95_mode must be pooled or max_directed");
    } else if (key == "run.threads") threads = integer(key, value);
    else if (key == "output.svg") write_svg = boolean(key, value);
    else if (key == "output.fields") write_fields = boolean(key, value);
    else if (key == "output.slab") write_slab = boolean(key, value);
    else throw InputError("unknown configuration key '" + key + "'");
}

void RunConfig::validate() const
{
    if (meshing.sigma_mm > 0.0 && !std::isfinite(meshing.sigma_mm)) throw InputError("mesh.sigma_mm must be finite");
    if (!(meshing.iso > 0.0 && meshing.iso < 1.0)) throw InputError("mesh.iso must lie in (0, 1)");
    if (!(meshing.max_area_mm2 > 0.0)) throw InputError("mesh.max_area_mm2 must be positive");
    if (!(meshing.min_angle_deg >= 0.0 && meshing.min_angle_deg < 34.0)) throw InputError("mesh.min_angle_deg must lie in [0, 34)");
    if (samples < 1) throw InputError("thickness.samples must be at least 1");
    if (!(slab_width_mm > 0.0)) throw InputError("slab.width_mm must be positive");
    if (cc_labels.empty()) throw InputError("labels.cc must not be empty");
    for (int l : cc_labels)
        if (l <= 0) throw InputError("labels.cc entries must be positive");
    for (const auto& s : schemes) s.validate();
}

std::string RunConfig::to_text() const
{
    std::ostringstream out;
    out << "[mesh]\n"
        << "sigma_mm = " << io::format_number(meshing.sigma_mm) << "\n"
        << "iso = " << io::format_number(meshing.iso) << "\n"
        << "max_area_mm2 = " << io::format_number(meshing.max_area_mm2) << "\n"
        << "min_angle_deg = " << io::format_number(meshing.min_angle_deg) << "\n\n"
        << "[thickness]\n"
        << "samples = " << samples << "\n\n"
        << "[endpoints]\n"
        << "along_offset_mm = " << io::format_number(endpoints.along_offset_mm) << "\n"
        << "normal_offset_mm = " << io::format_number(endpoints.normal_offset_mm) << "\n\n"
        << "[slab]\n"
        << "width_mm = " << io::format_number(slab_width_mm) << "\n"
        << "spacing_mm = " << io::format_number(slab_spacing_mm) << "\n\n"
        << "[labels]\n"
        << "cc = " << join_ints(cc_labels) << "\n"
        << "registration = " << join_ints(registration_labels) << "\n\n"
        << "[subseg]\n"
        << "schemes = [";
    for (std::size_t i = 0; i < schemes.size(); ++i) out << (i ? ", " : "") << '"' << to_string(schemes[i].kind) << '"';
    out << "]\n";
    for (const auto& s : schemes) out << "fractions." << to_string(s.kind) << " = " << join_numbers(s.fractions) << "\n";
    out << "\n[eval]\n"
        << "hd95_mode = \"" << (hd95_mode == HausdorffMode::pooled ? "pooled" : "max_directed") << "\"\n\n"
        << "[run]\n"
        << "threads = " << threads << "\n\n"
        << "[output]\n"
        << "svg = " << (write_svg ? "true" : "false") << "\n"
        << "fields = " << (write_fields ? "true" : "false") << "\n"
        << "slab = " << (write_slab ? "true" : "false") << "\n";
    return out.str();
}

RunConfig RunConfig::parse(std::string_view text)
{
    RunConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line.resize(i);
                break;
            }
        }
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[' && t.back() == ']' && t.find('=') == std::string::npos) {
            section = trim(std::string_view(t).substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw InputError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(std::string_view(t).substr(0, eq));
        try {
            cfg.set(section.empty() ? key : section + "." + key, std::string_view(t).substr(eq + 1));
        } catch (const InputError& e) {
            throw InputError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path)
{
    return parse(io::read_file(path));
}

int resolve_thread_count(int configured)
{
    if (const char* env = std::getenv("CCM_THREADS"); env && *env) {
        const double v = io::parse_number(env, "CCM_THREADS");
        if (!(v >= 1.0) || v != std::floor(v)) throw InputError("CCM_THREADS must be a positive integer");
        return static_cast<int>(v);
    }
    if (configured > 0) return configured;
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace ccm
