//! Shows the newest-first frame layout of the policy input and how episode
//! starts are padded.

use guided_rl::history::HistoryWindow;
use guided_rl::obs::Channel;

fn main() -> guided_rl::Result<()> {
    let mut w = HistoryWindow::new(2, 2, 1);
    println!("flat dimension (H+1)(1+obs+act) = {}", w.flat_dim());
    println!("episode start, nothing pushed: {:?}", w.flatten());

    w.push(Channel::Full.flag(), &[1.0, 2.0], &[0.0])?;
    println!("after a full frame:    {:?}", w.flatten());
    w.push(Channel::Partial.flag(), &[0.0, 3.0], &[5.0])?;
    println!("after a partial frame: {:?}", w.flatten());
    w.push(Channel::Partial.flag(), &[4.0, 0.0], &[-1.0])?;
    println!("oldest frame dropped:  {:?}", w.flatten());

    w.reset();
    println!("after reset:           {:?}", w.flatten());
    Ok(())
}
