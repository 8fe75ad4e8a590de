use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::DomainError;

/// Index of a logical link inside a [`Topology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkId(pub usize);

/// Index of a path inside a [`Topology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PathId(pub usize);

impl std::fmt::Display for LinkId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "l{}", self.0)
    }
}

impl std::fmt::Display for PathId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// A path as an ordered sequence of raw link names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPath {
    pub name: String,
    pub links: Vec<String>,
}

impl RawPath {
    pub fn new(name: impl Into<String>, links: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            name: name.into(),
            links: links.into_iter().map(Into::into).collect(),
        }
    }
}

/// A logical link. `members` lists the raw links merged into it, in path order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub name: String,
    pub members: Vec<String>,
}

/// Links, paths and the path-to-link incidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    links: Vec<Link>,
    path_names: Vec<String>,
    incidence: Vec<Vec<LinkId>>,
}

impl Topology {
    /// Builds a topology from named links and paths given as link-index lists.
    ///
    /// Links not used by any path are rejected, as are duplicate links
    /// within a path.
    pub fn new(
        links: Vec<Link>,
        paths: Vec<(String, Vec<LinkId>)>,
    ) -> Result<Self, DomainError> {
        if paths.is_empty() {
            return Err(DomainError::EmptyTopology);
        }
        let mut used = vec![false; links.len()];
        let mut path_names = Vec::with_capacity(paths.len());
        let mut incidence = Vec::with_capacity(paths.len());
        for (name, ls) in paths {
            if ls.is_empty() {
                return Err(DomainError::EmptyPath(name));
            }
            let mut seen = HashSet::new();
            for l in &ls {
                if l.0 >= links.len() {
                    return Err(DomainError::UnknownLink(l.to_string()));
                }
                if !seen.insert(*l) {
                    return Err(DomainError::DuplicateLink {
                        path: name,
                        link: links[l.0].name.clone(),
                    });
                }
                used[l.0] = true;
            }
            path_names.push(name);
            incidence.push(ls);
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(DomainError::UnusedLink(links[i].name.clone()));
        }
        Ok(Self {
            links,
            path_names,
            incidence,
        })
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn num_paths(&self) -> usize {
        self.incidence.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link_name(&self, l: LinkId) -> &str {
        &self.links[l.0].name
    }

    pub fn path_name(&self, p: PathId) -> &str {
        &self.path_names[p.0]
    }

    pub fn path_names(&self) -> &[String] {
        &self.path_names
    }

    pub fn path_ids(&self) -> impl Iterator<Item = PathId> {
        (0..self.num_paths()).map(PathId)
    }

    pub fn path_by_name(&self, name: &str) -> Option<PathId> {
        self.path_names.iter().position(|n| n == name).map(PathId)
    }

    /// Links traversed by `p`, in order.
    pub fn path_links(&self, p: PathId) -> &[LinkId] {
        &self.incidence[p.0]
    }

    pub fn incidence(&self) -> &[Vec<LinkId>] {
        &self.incidence
    }

    /// Paths through each link.
    pub fn link_paths(&self) -> Vec<Vec<PathId>> {
        let mut out = vec![Vec::new(); self.links.len()];
        for (p, ls) in self.incidence.iter().enumerate() {
            for l in ls {
                out[l.0].push(PathId(p));
            }
        }
        out
    }

    /// Copy in which every path owns private links, so no path shares
    /// information with any other.
    pub fn decoupled(&self) -> Topology {
        let mut links = Vec::new();
        let mut paths = Vec::new();
        for (p, ls) in self.incidence.iter().enumerate() {
            let mut own = Vec::with_capacity(ls.len());
            for l in ls {
                own.push(LinkId(links.len()));
                let src = &self.links[l.0];
                links.push(Link {
                    name: format!("{}@{}", src.name, self.path_names[p]),
                    members: src.members.clone(),
                });
            }
            paths.push((self.path_names[p].clone(), own));
        }
        Topology::new(links, paths).expect("decoupling preserves validity")
    }

    /// Raw paths over the member links, i.e. the inverse of logical reduction.
    pub fn to_raw_paths(&self) -> Vec<RawPath> {
        self.incidence
            .iter()
            .zip(&self.path_names)
            .map(|(ls, name)| RawPath {
                name: name.clone(),
                links: ls
                    .iter()
                    .flat_map(|l| self.links[l.0].members.iter().cloned())
                    .collect(),
            })
            .collect()
    }

    /// Renders the topology in the line-oriented file format.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for l in &self.links {
            writeln!(out, "link {}", l.name).unwrap();
        }
        for (ls, name) in self.incidence.iter().zip(&self.path_names) {
            write!(out, "path {name}").unwrap();
            for l in ls {
                write!(out, " {}", self.links[l.0].name).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Merges series links into logical links.
///
/// Two raw links `a`, `b` merge when they are carried by exactly the same set
/// of paths and `b` directly follows `a` in every one of them. Chains of such
/// pairs collapse into one logical link named after its members joined by `+`.
pub fn reduce_to_logical(raw_paths: &[RawPath]) -> Result<Topology, DomainError> {
    if raw_paths.is_empty() {
        return Err(DomainError::EmptyTopology);
    }
    let mut names = HashSet::new();
    let mut link_index: HashMap<&str, usize> = HashMap::new();
    let mut link_order: Vec<&str> = Vec::new();
    for rp in raw_paths {
        if !names.insert(rp.name.as_str()) {
            return Err(DomainError::DuplicatePath(rp.name.clone()));
        }
        if rp.links.is_empty() {
            return Err(DomainError::EmptyPath(rp.name.clone()));
        }
        let mut seen = HashSet::new();
        for l in &rp.links {
            if !seen.insert(l.as_str()) {
                return Err(DomainError::DuplicateLink {
                    path: rp.name.clone(),
                    link: l.clone(),
                });
            }
            link_index.entry(l.as_str()).or_insert_with(|| {
                link_order.push(l.as_str());
                link_order.len() - 1
            });
        }
    }
    let n = link_order.len();
    let mut membership: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (p, rp) in raw_paths.iter().enumerate() {
        for l in &rp.links {
            membership[link_index[l.as_str()]].insert(p);
        }
    }

    // successor[a] = Some(b) when b follows a in every path carrying a and
    // both carry the same paths.
    let mut successor: Vec<Option<Option<usize>>> = vec![None; n];
    for rp in raw_paths {
        let idx: Vec<usize> = rp.links.iter().map(|l| link_index[l.as_str()]).collect();
        for (i, &a) in idx.iter().enumerate() {
            let next = idx.get(i + 1).copied();
            successor[a] = match successor[a] {
                None => Some(next),
                Some(prev) if prev == next => Some(prev),
                Some(_) => Some(None),
            };
        }
    }
    let mut merge_next = vec![None; n];
    let mut has_pred = vec![false; n];
    for a in 0..n {
        if let Some(Some(b)) = successor[a] {
            if membership[a] == membership[b] {
                merge_next[a] = Some(b);
                has_pred[b] = true;
            }
        }
    }

    let mut group_of = vec![usize::MAX; n];
    let mut links = Vec::new();
    for start in (0..n).filter(|&i| !has_pred[i]) {
        let mut members = Vec::new();
        let mut cur = Some(start);
        while let Some(c) = cur {
            group_of[c] = links.len();
            members.push(link_order[c].to_string());
            cur = merge_next[c];
        }
        links.push(Link {
            name: members.join("+"),
            members,
        });
    }

    let paths = raw_paths
        .iter()
        .map(|rp| {
            let mut ls: Vec<LinkId> = Vec::new();
            for l in &rp.links {
                let g = LinkId(group_of[link_index[l.as_str()]]);
                if ls.last() != Some(&g) {
                    ls.push(g);
                }
            }
            (rp.name.clone(), ls)
        })
        .collect();
    Topology::new(links, paths)
}

/// Parses the line-oriented topology file format.
///
/// `link <id>` declares a link and `path <id> <link-id>...` declares an
/// ordered path. `#` starts a comment.
pub fn parse_topology_file(text: &str) -> Result<Vec<RawPath>, DomainError> {
    let mut declared = HashSet::new();
    let mut paths = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let parse_err = |msg: &str| DomainError::Parse {
            line: lineno + 1,
            message: msg.to_string(),
        };
        match tokens.next() {
            Some("link") => {
                let id = tokens.next().ok_or_else(|| parse_err("missing link id"))?;
                if tokens.next().is_some() {
                    return Err(parse_err("trailing tokens after link id"));
                }
                if !declared.insert(id.to_string()) {
                    return Err(parse_err(&format!("link `{id}` declared twice")));
                }
            }
            Some("path") => {
                let id = tokens.next().ok_or_else(|| parse_err("missing path id"))?;
                let links: Vec<String> = tokens.map(str::to_string).collect();
                if links.is_empty() {
                    return Err(parse_err(&format!("path `{id}` has no links")));
                }
                if let Some(bad) = links.iter().find(|l| !declared.contains(*l)) {
                    return Err(parse_err(&format!("unknown link `{bad}`")));
                }
                paths.push(RawPath::new(id, links));
            }
            Some(other) => return Err(parse_err(&format!("unknown directive `{other}`"))),
            None => unreachable!(),
        }
    }
    if paths.is_empty() {
        return Err(DomainError::EmptyTopology);
    }
    Ok(paths)
}

/// Parses a topology file and reduces it to its logical form.
pub fn load_topology(text: &str) -> Result<Topology, DomainError> {
    reduce_to_logical(&parse_topology_file(text)?)
}
