#include "srg/io.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace srg {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Token stream that skips '#' comments to end of line.
class Tokens {
public:
    explicit Tokens(std::istream& in) : in_(in) {}

    std::string next() {
        std::string t;
        while (true) {
            if (!(in_ >> t)) fail("ParseError", "unexpected end of input");
            if (t[0] == '#') {
                std::string rest;
                std::getline(in_, rest);
                continue;
            }
            return t;
        }
    }

    bool try_next(std::string& t) {
        while (true) {
            if (!(in_ >> t)) return false;
            if (t[0] == '#') {
                std::string rest;
                std::getline(in_, rest);
                continue;
            }
            return true;
        }
    }

    long integer() {
        std::string t = next();
        try {
            std::size_t pos = 0;
            long v = std::stol(t, &pos);
            if (pos != t.size()) throw std::invalid_argument(t);
            return v;
        } catch (const std::exception&) {
            fail("ParseError", "expected an integer, got '" + t + "'");
        }
    }

    double real() {
        std::string t = next();
        try {
            std::size_t pos = 0;
            double v = std::stod(t, &pos);
            if (pos != t.size()) throw std::invalid_argument(t);
            return v;
        } catch (const std::exception&) {
            fail("ParseError", "expected a number, got '" + t + "'");
        }
    }

private:
    std::istream& in_;
};

} // namespace

std::string write_model(const FactorGraph& fg) {
    std::ostringstream os;
    os << "srg-model\n";
    for (const auto& v : fg.variables()) os << "var " << v.name << " " << v.cardinality << "\n";
    for (const auto& f : fg.factors()) {
        os << "factor " << f.name << " " << f.scope.size();
        for (VarId v : f.scope) os << " " << fg.variables()[static_cast<std::size_t>(v)].name;
        for (Index i = 0; i < f.table.size(); ++i) {
            os << (i % 8 == 0 ? "\n  " : " ") << fmt_double(f.table[i]);
        }
        os << "\n";
    }
    os << "end\n";
    return os.str();
}

FactorGraph read_model(std::istream& in) {
    Tokens tk(in);
    if (tk.next() != "srg-model") fail("ParseError", "missing srg-model header");
    std::vector<VariableDecl> vars;
    std::vector<Factor> factors;
    std::map<std::string, VarId> index;
    while (true) {
        std::string kw = tk.next();
        if (kw == "end") break;
        if (kw == "var") {
            std::string name = tk.next();
            int card = static_cast<int>(tk.integer());
            index[name] = static_cast<VarId>(vars.size());
            vars.push_back({name, card});
        } else if (kw == "factor") {
            std::string name = tk.next();
            long arity = tk.integer();
            std::vector<VarId> scope;
            Index count = 1;
            for (long i = 0; i < arity; ++i) {
                std::string vn = tk.next();
                auto it = index.find(vn);
                if (it == index.end()) fail("ParseError", "factor references unknown variable " + vn);
                scope.push_back(it->second);
                count *= vars[static_cast<std::size_t>(it->second)].cardinality;
            }
            if (!std::is_sorted(scope.begin(), scope.end()))
                fail("ParseError",
                     "factor " + name + " scope must follow variable declaration order");
            std::vector<int> cards;
            for (VarId v : scope) cards.push_back(vars[static_cast<std::size_t>(v)].cardinality);
            Table t(scope, cards);
            for (Index i = 0; i < count; ++i) t[i] = tk.real();
            factors.push_back({name, scope, std::move(t)});
        } else {
            fail("ParseError", "unexpected token '" + kw + "' in model");
        }
    }
    return FactorGraph::make(std::move(vars), std::move(factors));
}

std::string write_region_graph(const RegionGraph& rg) {
    std::ostringstream os;
    os << "srg-regiongraph\n";
    auto vars = rg.all_vars();
    os << "vars " << vars.size();
    for (VarId v : vars) os << " " << rg.var_name(v);
    os << "\n";
    os << "factorscopes " << rg.factor_scopes().size() << "\n";
    for (const auto& [f, scope] : rg.factor_scopes()) {
        os << "  " << rg.factor_name(f) << " " << scope.size();
        for (VarId v : scope) os << " " << rg.var_name(v);
        os << "\n";
    }
    for (const auto& [id, r] : rg.regions()) {
        os << "region r" << id << "\n";
        os << "  vars " << r.vars.size();
        for (VarId v : r.vars) os << " " << rg.var_name(v);
        os << "\n";
        os << "  cliques " << r.cliques.size() << "\n";
        for (const auto& c : r.cliques) {
            os << "    " << c.vars.size();
            for (VarId v : c.vars) os << " " << rg.var_name(v);
            os << "\n";
        }
        os << "  factors " << r.factors.size();
        for (FactorId f : r.factors) os << " " << rg.factor_name(f);
        os << "\n";
    }
    os << "edges " << rg.edges().size() << "\n";
    for (const auto& [p, c] : rg.edges()) os << "  r" << p << " r" << c << "\n";
    os << "end\n";
    return os.str();
}

RegionGraph read_region_graph(std::istream& in, const FactorGraph* fg) {
    Tokens tk(in);
    if (tk.next() != "srg-regiongraph") fail("ParseError", "missing srg-regiongraph header");

    RegionGraph rg;
    std::map<std::string, VarId> var_of;
    auto resolve_var = [&](const std::string& name) -> VarId {
        if (fg) {
            int v = fg->var_index(name);
            if (v < 0) fail("ParseError", "variable " + name + " not in the model");
            return static_cast<VarId>(v);
        }
        auto it = var_of.find(name);
        if (it == var_of.end()) fail("ParseError", "undeclared variable " + name);
        return it->second;
    };

    long nv = -1;
    std::string kw = tk.next();
    if (kw != "vars") fail("ParseError", "expected vars section");
    nv = tk.integer();
    for (long i = 0; i < nv; ++i) {
        std::string name = tk.next();
        VarId v;
        if (fg) {
            int idx = fg->var_index(name);
            if (idx < 0) fail("ParseError", "variable " + name + " not in the model");
            v = static_cast<VarId>(idx);
        } else {
            v = static_cast<VarId>(i);
        }
        var_of[name] = v;
        rg.set_var_name(v, name);
    }

    std::map<std::string, FactorId> factor_of;
    kw = tk.next();
    if (kw != "factorscopes") fail("ParseError", "expected factorscopes section");
    long nf = tk.integer();
    for (long i = 0; i < nf; ++i) {
        std::string name = tk.next();
        long arity = tk.integer();
        std::vector<VarId> scope;
        for (long j = 0; j < arity; ++j) scope.push_back(resolve_var(tk.next()));
        FactorId f;
        if (fg) {
            int idx = fg->factor_index(name);
            if (idx < 0) fail("ParseError", "factor " + name + " not in the model");
            f = static_cast<FactorId>(idx);
        } else {
            f = static_cast<FactorId>(i);
        }
        factor_of[name] = f;
        rg.set_factor_scope(f, scope);
        rg.set_factor_name(f, name);
    }

    std::map<std::string, RegionId> region_of;
    while (true) {
        kw = tk.next();
        if (kw == "edges") break;
        if (kw != "region") fail("ParseError", "expected region or edges, got '" + kw + "'");
        std::string rname = tk.next();
        if (tk.next() != "vars") fail("ParseError", "expected vars in region block");
        long k = tk.integer();
        std::vector<VarId> vars;
        for (long i = 0; i < k; ++i) vars.push_back(resolve_var(tk.next()));
        if (tk.next() != "cliques") fail("ParseError", "expected cliques in region block");
        long nc = tk.integer();
        std::vector<Clique> cliques;
        for (long i = 0; i < nc; ++i) {
            long cz = tk.integer();
            std::vector<VarId> cv;
            for (long j = 0; j < cz; ++j) cv.push_back(resolve_var(tk.next()));
            cliques.push_back(make_clique(std::move(cv)));
        }
        if (tk.next() != "factors") fail("ParseError", "expected factors in region block");
        long nrf = tk.integer();
        std::vector<FactorId> fs;
        for (long i = 0; i < nrf; ++i) {
            std::string fn = tk.next();
            auto it = factor_of.find(fn);
            if (it == factor_of.end()) fail("ParseError", "region references unknown factor " + fn);
            fs.push_back(it->second);
        }
        region_of[rname] = rg.add_region(std::move(vars), std::move(cliques), std::move(fs));
    }
    long ne = tk.integer();
    for (long i = 0; i < ne; ++i) {
        std::string a = tk.next(), b = tk.next();
        auto ia = region_of.find(a), ib = region_of.find(b);
        if (ia == region_of.end() || ib == region_of.end())
            fail("ParseError", "edge references unknown region");
        rg.add_edge(ia->second, ib->second);
    }
    if (tk.next() != "end") fail("ParseError", "missing end");
    return rg;
}

std::string to_dot(const RegionGraph& rg) {
    std::ostringstream os;
    os << "digraph srg {\n  rankdir=TB;\n  node [shape=box];\n";
    std::map<RegionId, int> c;
    bool have_counts = true;
    try {
        c = counting_numbers(rg).c;
    } catch (const Error&) {
        have_counts = false;
    }
    for (const auto& [id, r] : rg.regions()) {
        os << "  r" << id << " [label=\"r" << id << ": {";
        for (std::size_t i = 0; i < r.vars.size(); ++i)
            os << (i ? "," : "") << rg.var_name(r.vars[i]);
        os << "}";
        if (have_counts) os << "\\nc=" << c[id];
        if (!r.factors.empty()) {
            os << "\\n[";
            for (std::size_t i = 0; i < r.factors.size(); ++i)
                os << (i ? "," : "") << rg.factor_name(r.factors[i]);
            os << "]";
        }
        os << "\"];\n";
    }
    for (const auto& [p, ch] : rg.edges()) os << "  r" << p << " -> r" << ch << ";\n";
    os << "}\n";
    return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot open " + path + " for writing");
    out << content;
    if (!out) fail("IoError", "failed writing " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

FactorGraph read_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open " + path);
    return read_model(in);
}

void write_model_file(const FactorGraph& fg, const std::string& path) {
    write_text_file(path, write_model(fg));
}

RegionGraph read_region_graph_file(const std::string& path, const FactorGraph* fg) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open " + path);
    return read_region_graph(in, fg);
}

void write_region_graph_file(const RegionGraph& rg, const std::string& path) {
    write_text_file(path, write_region_graph(rg));
}

} // namespace srg
