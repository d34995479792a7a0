#pragma once

#include "bp/ast.hpp"
#include "bp/kb.hpp"

#include <string>
#include <vector>

namespace bp {

struct GraphEdge {
    std::size_t source = 0;
    SubjectiveFormula guard;
    PrimitiveProgram rho;
    std::size_t target = 0;
};

/// Characteristic program graph. Node 0 is the program itself; nodes are
/// canonical remaining subprograms.
struct CharGraph {
    std::vector<ProgramPtr> nodes;
    std::vector<GraphEdge> edges;
    std::vector<std::vector<std::size_t>> out;  // edge indices per node, construction order
    std::vector<SubjectiveFormula> fin;
    std::vector<SubjectiveFormula> fail;
    std::size_t nil_node = 0;
};

/// Drops Nil from either side of a sequence, bottom-up.
ProgramPtr canonicalize(const ProgramPtr& p);
/// Structural key used for node identity.
std::string program_key(const ProgramPtr& p);

CharGraph build_graph(const ProgramPtr& delta);

struct EnabledSet {
    std::vector<std::size_t> edges;  // indices into CharGraph::edges
    bool is_final = false;
    bool is_failing = false;
};

EnabledSet enabled(const CharGraph& g, std::size_t node, const KnowledgeBase& kb);

std::string graph_to_dot(const ModelFile& m, const CharGraph& g);

}  // namespace bp
