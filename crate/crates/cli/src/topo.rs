use std::path::PathBuf;

use anyhow::Context;
use pab_core::domain::load_topology;
use pab_core::simkit::{generate_topology, GeneratorParams};
use pab_core::Topology;

use crate::{Classify, Failure, OutDir};

#[derive(Debug, clap::Subcommand)]
pub enum Command {
    /// Print the logical topology of a file.
    Show { file: PathBuf },
    /// Write a random topology to the output directory.
    Generate {
        #[arg(long, default_value_t = 100)]
        nodes: usize,
        #[arg(long, default_value_t = 10)]
        extra_links: usize,
        #[arg(long, default_value_t = 50)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "topology.txt")]
        name: String,
    },
}

fn describe(t: &Topology) {
    println!("{} links, {} paths", t.num_links(), t.num_paths());
    for p in t.path_ids() {
        let links: Vec<&str> = t.path_links(p).iter().map(|&l| t.link_name(l)).collect();
        println!("{:<12} {}", t.path_name(p), links.join(" "));
    }
}

pub fn run(cmd: Command, out: &OutDir) -> Result<(), Failure> {
    match cmd {
        Command::Show { file } => {
            let text = std::fs::read_to_string(&file)
                .with_context(|| format!("reading {}", file.display()))
                .config()?;
            let t = load_topology(&text).with_context(|| file.display().to_string()).config()?;
            describe(&t);
        }
        Command::Generate {
            nodes,
            extra_links,
            paths,
            seed,
            name,
        } => {
            let params = GeneratorParams { nodes, extra_links, paths };
            let t = generate_topology(&params, seed).config()?;
            let written = out.write(&name, t.to_file_string())?;
            describe(&t);
            println!("written to {}", written.display());
        }
    }
    Ok(())
}
