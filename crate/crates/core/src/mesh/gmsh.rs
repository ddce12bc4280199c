//! Reader and writer for the ASCII Gmsh 2.2 subset described in `docs/mesh-format.md`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{face_key, tags, BoundaryFace, Domain, Mesh};
use crate::error::{Error, Result};
use crate::fem::hex;

const HEX: u32 = 5;
const QUAD: u32 = 3;

pub fn write_mesh_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n");

    let mut used: Vec<u32> = mesh.boundary_faces.iter().map(|f| f.tag).collect();
    used.sort_unstable();
    used.dedup();
    s.push_str("$PhysicalNames\n");
    let _ = writeln!(s, "{}", used.len() + 1);
    for t in &used {
        let name = tags::name(*t).map(str::to_string).unwrap_or_else(|| format!("tag_{t}"));
        let _ = writeln!(s, "2 {t} \"{name}\"");
    }
    let _ = writeln!(s, "3 {} \"{}\"", mesh.domain.physical_id(), mesh.domain.name());
    s.push_str("$EndPhysicalNames\n");

    s.push_str("$Nodes\n");
    let _ = writeln!(s, "{}", mesh.n_nodes());
    for (i, p) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(s, "{} {:.16e} {:.16e} {:.16e}", i + 1, p[0], p[1], p[2]);
    }
    s.push_str("$EndNodes\n");

    s.push_str("$Elements\n");
    let _ = writeln!(s, "{}", mesh.n_cells() + mesh.boundary_faces.len());
    let mut id = 1;
    for f in &mesh.boundary_faces {
        let n = hex::FACES[f.face].map(|a| mesh.cells[f.cell][a] + 1);
        let _ = writeln!(s, "{id} {QUAD} 2 {} {} {} {} {} {}", f.tag, f.tag, n[0], n[1], n[2], n[3]);
        id += 1;
    }
    let phys = mesh.domain.physical_id();
    for c in &mesh.cells {
        let _ = write!(s, "{id} {HEX} 2 {phys} 1");
        for n in c {
            let _ = write!(s, " {}", n + 1);
        }
        s.push('\n');
        id += 1;
    }
    s.push_str("$EndElements\n");
    s
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    std::fs::write(path, write_mesh_string(mesh))?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Some((i + 1, t));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next()
            .ok_or_else(|| Error::parse(self.last, format!("unexpected end of file, expected {what}")))
    }
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {what}")))
}

pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let mut names: HashMap<u32, String> = HashMap::new();
    let mut node_index: HashMap<u64, usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut cells: Vec<[usize; 8]> = Vec::new();
    let mut cell_phys: Vec<(usize, u32)> = Vec::new();
    let mut quads: Vec<(usize, u32, [usize; 4])> = Vec::new();
    let mut seen_format = false;
    let mut end_line = 0;

    while let Some((ln, header)) = lines.next() {
        match header {
            "$MeshFormat" => {
                let (l, v) = lines.expect("format line")?;
                let mut it = v.split_whitespace();
                let version: String = num(it.next(), l, "version")?;
                let file_type: u32 = num(it.next(), l, "file type")?;
                if !version.starts_with("2.2") || file_type != 0 {
                    return Err(Error::parse(
                        l,
                        format!("unsupported format {version} type {file_type}; only ASCII 2.2"),
                    ));
                }
                let (l, e) = lines.expect("$EndMeshFormat")?;
                if e != "$EndMeshFormat" {
                    return Err(Error::parse(l, "expected $EndMeshFormat"));
                }
                seen_format = true;
            }
            "$PhysicalNames" => {
                let (l, c) = lines.expect("name count")?;
                let count: usize = num(Some(c), l, "name count")?;
                for _ in 0..count {
                    let (l, row) = lines.expect("physical name")?;
                    let mut it = row.splitn(3, char::is_whitespace);
                    let _dim: u32 = num(it.next(), l, "dimension")?;
                    let id: u32 = num(it.next(), l, "physical id")?;
                    let name = it.next().unwrap_or("").trim().trim_matches('"').to_string();
                    names.insert(id, name);
                }
                let (l, e) = lines.expect("$EndPhysicalNames")?;
                if e != "$EndPhysicalNames" {
                    return Err(Error::parse(l, "expected $EndPhysicalNames"));
                }
            }
            "$Nodes" => {
                let (l, c) = lines.expect("node count")?;
                let count: usize = num(Some(c), l, "node count")?;
                for _ in 0..count {
                    let (l, row) = lines.expect("node")?;
                    let mut it = row.split_whitespace();
                    let id: u64 = num(it.next(), l, "node id")?;
                    let p = [
                        num(it.next(), l, "x coordinate")?,
                        num(it.next(), l, "y coordinate")?,
                        num(it.next(), l, "z coordinate")?,
                    ];
                    if node_index.insert(id, nodes.len()).is_some() {
                        return Err(Error::parse(l, format!("duplicate node id {id}")));
                    }
                    nodes.push(p);
                }
                let (l, e) = lines.expect("$EndNodes")?;
                if e != "$EndNodes" {
                    return Err(Error::parse(l, "expected $EndNodes"));
                }
            }
            "$Elements" => {
                let (l, c) = lines.expect("element count")?;
                let count: usize = num(Some(c), l, "element count")?;
                for _ in 0..count {
                    let (l, row) = lines.expect("element")?;
                    let toks: Vec<&str> = row.split_whitespace().collect();
                    let mut it = toks.iter().copied();
                    let _id: u64 = num(it.next(), l, "element id")?;
                    let ty: u32 = num(it.next(), l, "element type")?;
                    let ntags: usize = num(it.next(), l, "tag count")?;
                    let mut etags = Vec::with_capacity(ntags);
                    for _ in 0..ntags {
                        etags.push(num::<u32>(it.next(), l, "tag")?);
                    }
                    let nn = match ty {
                        HEX => 8,
                        QUAD => 4,
                        other => {
                            return Err(Error::UnsupportedElement {
                                line: l,
                                element_type: other,
                            })
                        }
                    };
                    let phys = *etags.first().ok_or_else(|| Error::parse(l, "element without physical tag"))?;
                    let mut conn = Vec::with_capacity(nn);
                    for _ in 0..nn {
                        let id: u64 = num(it.next(), l, "node reference")?;
                        conn.push(*node_index.get(&id).ok_or_else(|| Error::parse(l, format!("unknown node {id}")))?);
                    }
                    if it.next().is_some() {
                        return Err(Error::parse(l, "trailing tokens"));
                    }
                    if ty == HEX {
                        cell_phys.push((l, phys));
                        cells.push(conn.try_into().unwrap());
                    } else {
                        quads.push((l, phys, conn.try_into().unwrap()));
                    }
                }
                let (l, e) = lines.expect("$EndElements")?;
                if e != "$EndElements" {
                    return Err(Error::parse(l, "expected $EndElements"));
                }
                end_line = l;
            }
            other if other.starts_with("$End") => {
                return Err(Error::parse(ln, format!("unexpected {other}")));
            }
            other if other.starts_with('$') => {
                let end = format!("$End{}", &other[1..]);
                loop {
                    let (_, l) = lines.expect(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
            _ => return Err(Error::parse(ln, format!("unexpected content {header:?}"))),
        }
    }

    if !seen_format {
        return Err(Error::parse(1, "missing $MeshFormat section"));
    }
    if cells.is_empty() {
        return Err(Error::parse(lines.last, "no hexahedral elements"));
    }
    let (first_line, phys) = cell_phys[0];
    if let Some((l, _)) = cell_phys.iter().find(|(_, p)| *p != phys) {
        return Err(Error::parse(*l, "hexahedra carry more than one domain tag"));
    }
    let domain = Domain::from_physical_id(phys)
        .or_else(|| match names.get(&phys).map(String::as_str) {
            Some("solid") => Some(Domain::Solid),
            Some("fluid") => Some(Domain::Fluid),
            Some("macro") => Some(Domain::Macro),
            _ => None,
        })
        .ok_or_else(|| Error::parse(first_line, format!("unknown domain tag {phys}")))?;

    let mesh_faces: HashMap<[usize; 4], (usize, usize)> = {
        let skeleton = Mesh {
            nodes: nodes.clone(),
            cells: cells.clone(),
            boundary_faces: Vec::new(),
            domain,
        };
        skeleton
            .exterior_faces()
            .into_iter()
            .map(|(c, f)| (face_key(&cells[c], f), (c, f)))
            .collect()
    };
    let mut boundary_faces = Vec::with_capacity(quads.len());
    for (l, phys, conn) in quads {
        let mut k = conn;
        k.sort_unstable();
        let (cell, face) = *mesh_faces
            .get(&k)
            .ok_or_else(|| Error::parse(l, "boundary quadrilateral is not an exterior face of the hexahedra"))?;
        let tag = if tags::name(phys).is_some() {
            phys
        } else {
            names.get(&phys).and_then(|n| tags::from_name(n)).unwrap_or(phys)
        };
        boundary_faces.push(BoundaryFace { cell, face, tag });
    }
    boundary_faces.sort_unstable();
    if boundary_faces.len() < mesh_faces.len() {
        return Err(Error::parse(
            end_line,
            format!(
                "missing boundary tags: {} of {} exterior faces carry none",
                mesh_faces.len() - boundary_faces.len(),
                mesh_faces.len()
            ),
        ));
    }
    let mesh = Mesh {
        nodes,
        cells,
        boundary_faces,
        domain,
    };
    mesh.validate()?;
    Ok(mesh)
}
