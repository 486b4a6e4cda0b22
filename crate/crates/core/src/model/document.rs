//! Line-oriented model documents. See `docs/model-format.md`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{fmt_tuple, AttributeAlphabet, ChoiceDistribution, Code, ModelSpec, RuleOption, Topology, UpdateRule};
use crate::error::{Error, Result};
use crate::rational::{format_ratio, parse_rational_at, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Model,
    Topology,
    Rule,
    Choice,
}

impl Section {
    fn name(self) -> &'static str {
        match self {
            Section::Model => "model",
            Section::Topology => "topology",
            Section::Rule => "rule",
            Section::Choice => "choice",
        }
    }
}

struct Line<'a> {
    number: usize,
    tokens: Vec<&'a str>,
    text: &'a str,
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(head, _)| head).trim()
}

fn parse_agent(token: &str, n: Option<usize>, line: usize) -> Result<usize> {
    let a: usize = token
        .parse()
        .map_err(|_| Error::syntax(line, format!("expected an agent index, found `{token}`")))?;
    if a == 0 || n.is_some_and(|n| a > n) {
        return Err(Error::syntax(line, format!("agent index {a} out of range")));
    }
    Ok(a - 1)
}

fn parse_count(token: Option<&&str>, what: &str, line: usize) -> Result<usize> {
    token
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::syntax(line, format!("expected {what}")))
}

/// Parses and validates a model document.
pub fn parse_model(source: &str) -> Result<ModelSpec> {
    let mut sections: BTreeMap<usize, (Section, Vec<Line>)> = BTreeMap::new();
    let mut current: Option<usize> = None;
    for (k, raw) in source.lines().enumerate() {
        let number = k + 1;
        let text = strip_comment(raw);
        if text.is_empty() {
            continue;
        }
        if let Some(header) = text.strip_prefix('[') {
            let name = header
                .strip_suffix(']')
                .ok_or_else(|| Error::syntax(number, "unterminated section header"))?
                .trim();
            let section = match name {
                "model" => Section::Model,
                "topology" => Section::Topology,
                "rule" => Section::Rule,
                "choice" => Section::Choice,
                other => return Err(Error::syntax(number, format!("unknown section [{other}]"))),
            };
            let key = section as usize;
            if sections.contains_key(&key) {
                return Err(Error::syntax(number, format!("duplicate section [{name}]")));
            }
            sections.insert(key, (section, Vec::new()));
            current = Some(key);
            continue;
        }
        let key = current.ok_or_else(|| Error::syntax(number, "content before the first section header"))?;
        sections.get_mut(&key).expect("section exists").1.push(Line {
            number,
            tokens: text.split_whitespace().collect(),
            text,
        });
    }
    let mut take = |s: Section| {
        sections
            .remove(&(s as usize))
            .map(|(_, lines)| lines)
            .ok_or_else(|| Error::syntax(source.lines().count().max(1), format!("missing section [{}]", s.name())))
    };
    let model_lines = take(Section::Model)?;
    let topology_lines = take(Section::Topology)?;
    let rule_lines = take(Section::Rule)?;
    let choice_lines = take(Section::Choice)?;

    let (name, alphabet) = parse_model_section(&model_lines)?;
    let topology = parse_topology_section(&topology_lines)?;
    let rule = parse_rule_section(&rule_lines, &alphabet)?;
    let choice = parse_choice_section(&choice_lines, &topology, rule.arity())?;
    ModelSpec::new(name.unwrap_or_default(), alphabet, topology, rule, choice)
}

fn key_value<'a>(line: &Line<'a>) -> Result<(&'a str, &'a str)> {
    line.text
        .split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| Error::syntax(line.number, "expected `key = value`"))
}

fn parse_model_section(lines: &[Line]) -> Result<(Option<String>, AttributeAlphabet)> {
    let mut name = None;
    let mut alphabet = None;
    for line in lines {
        match key_value(line)? {
            ("name", v) => name = Some(v.to_string()),
            ("attributes", v) => {
                let labels: Vec<&str> = v.split(',').map(str::trim).collect();
                alphabet = Some(AttributeAlphabet::new(labels)?);
            }
            (k, _) => return Err(Error::syntax(line.number, format!("unknown key `{k}` in [model]"))),
        }
    }
    let alphabet = alphabet.ok_or_else(|| {
        Error::syntax(
            lines.first().map_or(1, |l| l.number),
            "[model] needs `attributes = ...`",
        )
    })?;
    Ok((name, alphabet))
}

fn parse_topology_section(lines: &[Line]) -> Result<Topology> {
    let mut agents = None;
    let mut undirected = false;
    let mut edges = Vec::new();
    for line in lines {
        match line.tokens.as_slice() {
            ["complete", n] => {
                if lines.len() != 1 {
                    return Err(Error::syntax(
                        line.number,
                        "`complete N` must be the only topology line",
                    ));
                }
                let n: usize = n
                    .parse()
                    .map_err(|_| Error::syntax(line.number, "expected agent count after `complete`"))?;
                return Topology::complete(n);
            }
            ["agents", rest @ ..] => agents = Some(parse_count(rest.first(), "agent count", line.number)?),
            ["undirected"] => undirected = true,
            [i, j, w] => edges.push((line.number, *i, *j, *w)),
            _ => {
                return Err(Error::syntax(
                    line.number,
                    format!("unrecognized topology line `{}`", line.text),
                ))
            }
        }
    }
    let mut parsed = Vec::with_capacity(edges.len());
    for (number, i, j, w) in edges {
        let i = parse_agent(i, agents, number)?;
        let j = parse_agent(j, agents, number)?;
        parsed.push((number, i, j, parse_rational_at(w, number)?));
    }
    let n = match agents {
        Some(n) => n,
        None => parsed.iter().map(|&(_, i, j, _)| i.max(j) + 1).max().unwrap_or(0),
    };
    let mut topology = Topology::empty(n)?;
    for (number, i, j, w) in parsed {
        let added = if undirected {
            topology.add_undirected(i, j, w)
        } else {
            topology.add_edge(i, j, w)
        };
        added.map_err(|e| match e {
            Error::Validation(m) => Error::syntax(number, m),
            other => other,
        })?;
    }
    Ok(topology)
}

fn parse_rule_section(lines: &[Line], alphabet: &AttributeAlphabet) -> Result<UpdateRule> {
    if let [line] = lines {
        if line.tokens == ["builtin", "voter"] {
            return Ok(UpdateRule::imitation(alphabet.len()));
        }
    }
    let mut arity = None;
    let mut options: Vec<RuleOption> = Vec::new();
    let mut rows = Vec::new();
    for line in lines {
        match line.tokens.as_slice() {
            ["builtin", ..] => {
                return Err(Error::syntax(line.number, "`builtin voter` must be the only rule line"));
            }
            ["arity", rest @ ..] => arity = Some(parse_count(rest.first(), "rule arity", line.number)?),
            ["lambda", label, p] => options.push(RuleOption {
                label: label.to_string(),
                probability: parse_rational_at(p, line.number)?,
            }),
            tokens if tokens.contains(&"->") => rows.push(line),
            _ => {
                return Err(Error::syntax(
                    line.number,
                    format!("unrecognized rule line `{}`", line.text),
                ))
            }
        }
    }
    let arity = arity.ok_or_else(|| Error::syntax(lines.first().map_or(1, |l| l.number), "[rule] needs `arity r`"))?;
    if options.is_empty() {
        options.push(RuleOption {
            label: "default".into(),
            probability: crate::rational::one(),
        });
    }
    let delta = alphabet.len();
    let template = UpdateRule::from_fn(arity, delta, options.clone(), |_, _| 0)?;
    let mut table: Vec<Option<Code>> = vec![None; template.table().len()];
    for line in rows {
        let arrow = line.tokens.iter().position(|t| *t == "->").expect("row has an arrow");
        let (lhs, rhs) = (&line.tokens[..arrow], &line.tokens[arrow + 1..]);
        let [out] = rhs else {
            return Err(Error::syntax(line.number, "expected exactly one output after `->`"));
        };
        let (args, option) = if lhs.len() == arity + 1 {
            let label = lhs[arity];
            let option = options
                .iter()
                .position(|o| o.label == label)
                .ok_or_else(|| Error::syntax(line.number, format!("unknown option `{label}`")))?;
            (&lhs[..arity], option)
        } else if lhs.len() == arity && options.len() == 1 {
            (lhs, 0)
        } else {
            return Err(Error::syntax(
                line.number,
                format!("expected {arity} attribute(s) and an option label before `->`"),
            ));
        };
        let code = |label: &str| {
            alphabet
                .code_of(label)
                .ok_or_else(|| Error::syntax(line.number, format!("unknown attribute `{label}`")))
        };
        let codes = args.iter().map(|a| code(a)).collect::<Result<Vec<_>>>()?;
        let idx = template.table_index(codes, option);
        if table[idx].replace(code(out)?).is_some() {
            return Err(Error::syntax(line.number, "duplicate rule table entry"));
        }
    }
    if let Some(missing) = table.iter().position(Option::is_none) {
        let per_option = table.len() / options.len();
        let mut rest = missing % per_option;
        let mut labels = Vec::with_capacity(arity);
        for _ in 0..arity {
            labels.push(alphabet.label((rest % delta) as Code));
            rest /= delta;
        }
        return Err(Error::validation(format!(
            "rule table is not total: no entry for `{} {}`",
            labels.join(" "),
            options[missing / per_option].label
        )));
    }
    let table = table.into_iter().map(|c| c.expect("checked total")).collect();
    UpdateRule::new(arity, delta, options, table)
}

fn parse_choice_section(lines: &[Line], topology: &Topology, arity: usize) -> Result<ChoiceDistribution> {
    if let [line] = lines {
        if line.tokens == ["from-topology", "uniform"] {
            return ChoiceDistribution::from_topology(topology, arity);
        }
    }
    let n = Some(topology.agent_count());
    let mut entries = BTreeMap::new();
    for line in lines {
        if line.tokens.len() != arity + 1 {
            return Err(Error::syntax(
                line.number,
                format!("expected {arity} agent index(es) and a probability"),
            ));
        }
        let tuple = line.tokens[..arity]
            .iter()
            .map(|t| parse_agent(t, n, line.number))
            .collect::<Result<Vec<_>>>()?;
        let p: Rational = parse_rational_at(line.tokens[arity], line.number)?;
        if entries.insert(tuple.clone(), p).is_some() {
            return Err(Error::syntax(
                line.number,
                format!("duplicate choice {}", fmt_tuple(&tuple)),
            ));
        }
    }
    ChoiceDistribution::new(entries)
}

/// Writes the fully explicit form of `spec`; `parse_model` reads it back to
/// an equal value.
pub fn serialize_model(spec: &ModelSpec) -> String {
    let mut out = String::new();
    let alphabet = spec.alphabet();
    let _ = writeln!(out, "[model]");
    if !spec.name().is_empty() {
        let _ = writeln!(out, "name = {}", spec.name());
    }
    let _ = writeln!(out, "attributes = {}", alphabet.symbols().join(", "));
    let _ = writeln!(out, "\n[topology]");
    let _ = writeln!(out, "agents {}", spec.n_agents());
    for (i, j, w) in spec.topology().edges() {
        let _ = writeln!(out, "{} {} {}", i + 1, j + 1, format_ratio(w));
    }
    let rule = spec.rule();
    let _ = writeln!(out, "\n[rule]");
    let _ = writeln!(out, "arity {}", rule.arity());
    for o in rule.options() {
        let _ = writeln!(out, "lambda {} {}", o.label, format_ratio(&o.probability));
    }
    let delta = alphabet.len();
    let per_option = rule.table().len() / rule.options().len();
    for (idx, &y) in rule.table().iter().enumerate() {
        let option = idx / per_option;
        let mut rest = idx % per_option;
        let mut args = Vec::with_capacity(rule.arity());
        for _ in 0..rule.arity() {
            args.push(alphabet.label((rest % delta) as Code));
            rest /= delta;
        }
        let _ = writeln!(
            out,
            "{} {} -> {}",
            args.join(" "),
            rule.options()[option].label,
            alphabet.label(y)
        );
    }
    let _ = writeln!(out, "\n[choice]");
    for (tuple, p) in spec.choice().entries() {
        let agents: Vec<String> = tuple.iter().map(|a| (a + 1).to_string()).collect();
        let _ = writeln!(out, "{} {}", agents.join(" "), format_ratio(p));
    }
    out
}
