import java.net.Socket;

public class SendPing {
    public static void main(String[] args) {
        String host = args[0];
        try {
            Socket socket = new Socket(host, 7);
        } catch (SocketException ex) {
            System.err.println("Socket failure: " + ex.getMessage());
            ex.printStackTrace();
        }
        System.out.println("socket open to " + host);
    }
}
