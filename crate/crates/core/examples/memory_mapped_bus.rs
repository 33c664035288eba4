//! One transaction through the coded master and slave wrappers, cycle by cycle.
//!
//! Run with `cargo run --example memory_mapped_bus`.

use cdma_bus::bus_interface::{self, BusTransaction, ReferenceBus, SlaveModel};
use cdma_bus::codebook;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let book = codebook::walsh_codebook(8)?;
    let mut slave = SlaveModel::new(0x1000, 16)?;

    let write = BusTransaction::write(0x1008, 0xCAFE_F00D);
    let request = bus_interface::master_issue(&write, &book)?;
    println!("write request, {} cycles:", request.len());
    for (cycle, s) in request.iter().enumerate() {
        println!(
            "  {cycle}: write={} waitrequest={} address={:x} writedata={:x}",
            s.write as u8, s.waitrequest as u8, s.address_lines, s.writedata_lines
        );
    }
    let response = bus_interface::slave_execute(&request, &book, &mut slave, true)?;
    let access = response.access;
    println!("slave performed {:?} at {:#x} with {:#010X}", access.kind, access.address, access.data);

    let read = BusTransaction::read(0x1008);
    let request = bus_interface::master_issue(&read, &book)?;
    let response = bus_interface::slave_execute(&request, &book, &mut slave, true)?;
    let data = bus_interface::master_complete(&response.signals, &book, true)?;
    println!(
        "read took {} cycles and returned {data:#010X}",
        request.len() + response.signals.len()
    );

    let mut reference = ReferenceBus::new(SlaveModel::new(0x1000, 16)?);
    reference.execute(&write)?;
    assert_eq!(reference.execute(&read)?, Some(data));
    println!("uncoded reference agrees");

    for name in ["address", "writedata", "waitrequest"] {
        print!("{} ", bus_interface::signal_name("avs", "s0", name)?);
    }
    println!();
    Ok(())
}
