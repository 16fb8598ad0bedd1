import java.net.Socket;

public class SendPing {
    public static void main(String[] args) {
        String host = args[0];
        Socket socket = new Socket(host, 7);
        System.out.println("socket open to " + host);
    }
}
